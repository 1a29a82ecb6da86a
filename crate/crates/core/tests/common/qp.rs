//! Random feasible QPs and exhaustive reference solutions.

use amod_core::qp::{Hessian, QProblem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, me: usize, mi: usize) -> QProblem {
    let mut normal = || rng.random::<f64>() * 2.0 - 1.0;
    let b = DMatrix::from_fn(n, n, |_, _| normal());
    let mut p = b.tr_mul(&b);
    for i in 0..n {
        p[(i, i)] += 0.1;
    }
    let x0 = DVector::from_fn(n, |_, _| normal());
    let a_eq = DMatrix::from_fn(me, n, |_, _| normal());
    let b_eq = &a_eq * &x0;
    let g = DMatrix::from_fn(mi, n, |_, _| normal());
    let slack = DVector::from_fn(mi, |i, _| if i % 3 == 0 { 0.0 } else { normal().abs() });
    let h = &g * &x0 + slack;
    let c = DVector::from_fn(n, |_, _| 3.0 * normal());
    QProblem {
        hessian: Hessian::Dense(p),
        c,
        constant: 0.0,
        a_eq,
        b_eq,
        g,
        h,
    }
}

/// Enumerates every active subset of the inequalities, solves the KKT
/// system for each, and keeps the best primal-dual feasible candidate.
pub fn enumerate_active_sets(qp: &QProblem) -> Option<DVector<f64>> {
    let n = qp.dim();
    let me = qp.a_eq.nrows();
    let mi = qp.g.nrows();
    let p = qp.hessian.to_dense();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << mi) {
        let set: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
        let k = n + me + set.len();
        let mut kkt = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p);
        for i in 0..n {
            rhs[i] = -qp.c[i];
        }
        for r in 0..me {
            for j in 0..n {
                kkt[(n + r, j)] = qp.a_eq[(r, j)];
                kkt[(j, n + r)] = qp.a_eq[(r, j)];
            }
            rhs[n + r] = qp.b_eq[r];
        }
        for (t, &r) in set.iter().enumerate() {
            for j in 0..n {
                kkt[(n + me + t, j)] = qp.g[(r, j)];
                kkt[(j, n + me + t)] = qp.g[(r, j)];
            }
            rhs[n + me + t] = qp.h[r];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let primal_ok = (&qp.g * &x - &qp.h).iter().all(|v| *v <= 1e-9);
        let dual_ok = (0..set.len()).all(|t| sol[n + me + t] >= -1e-9);
        if primal_ok && dual_ok {
            let f = qp.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

pub fn kkt_residual(qp: &QProblem, x: &DVector<f64>, nu: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let grad = qp.hessian.apply(x) + &qp.c + qp.a_eq.tr_mul(nu) + qp.g.tr_mul(lambda);
    let slack = &qp.g * x - &qp.h;
    let primal = (&qp.a_eq * x - &qp.b_eq).amax().max(slack.iter().copied().fold(0.0, f64::max));
    let dual = lambda.iter().copied().fold(0.0, |a: f64, l| a.max(-l));
    let compl = lambda.iter().zip(slack.iter()).map(|(l, s)| (l * s).abs()).fold(0.0, f64::max);
    grad.amax().max(primal).max(dual).max(compl)
}

