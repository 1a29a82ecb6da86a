mod common;

use amod_core::qp::{solve_qp, Hessian, QProblem, QpSettings, QpStatus, QpWorkspace};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use common::qp::{enumerate_active_sets, kkt_residual, random_problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..60 {
        let n = 2 + case % 7;
        let me = case % 3;
        let mi = 1 + case % 8;
        let qp = random_problem(&mut rng, n, me.min(n - 1), mi);
        let oracle = enumerate_active_sets(&qp).expect("constructed feasible");
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        assert!((&sol.x - &oracle).amax() < 1e-6, "case {case}: {} vs {}", sol.x, oracle);
    }
}

#[test]
fn hundred_random_problems_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = 5 + case % 40;
        let qp = random_problem(&mut rng, n, n / 4, n);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        let r = kkt_residual(&qp, &sol.x, &sol.eq_dual, &sol.ineq_dual);
        assert!(r <= 1e-6, "case {case}: kkt residual {r}");
    }
}

#[test]
fn workspace_reuse_matches_fresh_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random_problem(&mut rng, 12, 3, 10);
    let ws = QpWorkspace::new(base.hessian.clone(), base.a_eq.clone(), base.g.clone()).unwrap();
    for _ in 0..10 {
        let other = random_problem(&mut rng, 12, 3, 10);
        // same matrices, new right-hand sides
        let mut qp = base.clone();
        qp.c = other.c.clone();
        let x0 = DVector::from_fn(12, |_, _| rng.random::<f64>());
        qp.b_eq = &qp.a_eq * &x0;
        qp.h = &qp.g * &x0 + DVector::from_fn(10, |_, _| rng.random::<f64>());
        let fresh = solve_qp(&qp, &QpSettings::default()).unwrap();
        let reused = ws.solve(&qp.c, 0.0, &qp.b_eq, &qp.h, &QpSettings::default()).unwrap();
        assert!((fresh.x - reused.x).amax() < 1e-10);
    }
}

#[test]
fn scaled_gram_hessian_agrees_with_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let factor = DMatrix::from_fn(4, 15, |_, _| rng.random::<f64>() - 0.5);
    let mut qp = random_problem(&mut rng, 15, 4, 12);
    qp.hessian = Hessian::ScaledGram {
        diag: 0.3,
        gram: 5.0,
        factor,
    };
    let a = solve_qp(&qp, &QpSettings::default()).unwrap();
    qp.hessian = Hessian::Dense(qp.hessian.to_dense());
    let b = solve_qp(&qp, &QpSettings::default()).unwrap();
    assert_eq!(a.status, QpStatus::Optimal);
    assert!((a.x - b.x).amax() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_are_kkt_points(seed in any::<u64>(), n in 2usize..20, mi in 0usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_problem(&mut rng, n, n / 3, mi);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert!(kkt_residual(&qp, &sol.x, &sol.eq_dual, &sol.ineq_dual) <= 1e-6);
    }

    #[test]
    fn nonnegative_box_projection(v in proptest::collection::vec(-5.0f64..5.0, 1..12)) {
        // min ½‖x − v‖² s.t. x ≥ 0 has solution max(v, 0)
        let n = v.len();
        let qp = QProblem {
            hessian: Hessian::ScaledGram { diag: 1.0, gram: 0.0, factor: DMatrix::zeros(0, n) },
            c: -DVector::from_vec(v.clone()),
            constant: 0.0,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            g: -DMatrix::identity(n, n),
            h: DVector::zeros(n),
        };
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        for (x, t) in sol.x.iter().zip(&v) {
            prop_assert!((x - t.max(0.0)).abs() < 1e-12);
        }
    }
}
