//! A known linear system, a model-based controller for it, and the
//! checks that compare the data-driven controller against both.

use std::sync::Arc;

use amod_core::deepc::{
    assemble_hankel_set, fundamental_lemma_residual, CollectedData, DeepcController, DeepcModel, DeepcParams,
    LtiOracle, SignalSeries,
};
use amod_core::qp::{solve_qp, Hessian, QProblem, QpSettings, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..len).map(|_| (0..dim).map(|_| scale * rng.random::<f64>()).collect()).collect()
}

pub fn series(s: &[Vec<f64>]) -> SignalSeries {
    SignalSeries::new(s).unwrap()
}

/// Residuals of one oracle trajectory and of the same trajectory with one
/// output entry corrupted by +1.
pub fn lemma_residuals(seed: u64) -> (f64, f64) {
    let (t_ini, horizon) = (4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = LtiOracle::random_positive(4, 2, 2, 2, &mut rng);
    assert!(sys.spectral_radius() < 1.0);
    let u = random_signal(&mut rng, 200, 2, 1.0);
    let w = random_signal(&mut rng, 200, 2, 1.0);
    let y = sys.simulate(&u, &w);
    let h = assemble_hankel_set(&series(&u), &series(&w), &series(&y), t_ini, horizon, Some(4)).unwrap();
    assert!(h.persistently_exciting, "seed {seed}");

    let ut = random_signal(&mut rng, t_ini + horizon, 2, 1.0);
    let wt = random_signal(&mut rng, t_ini + horizon, 2, 1.0);
    let mut yt = sys.simulate(&ut, &wt);
    let clean = fundamental_lemma_residual(&h, &series(&ut), &series(&wt), &series(&yt)).unwrap();
    yt[t_ini + 1][0] += 1.0;
    let corrupted = fundamental_lemma_residual(&h, &series(&ut), &series(&wt), &series(&yt)).unwrap();
    (clean, corrupted)
}

/// Model-based predictive controller over `(x_init, u_0..u_{N-1})` with the
/// true system matrices and the same objective and constraints.
struct MpcOracle {
    sys: LtiOracle,
    t_ini: usize,
    horizon: usize,
    alpha: f64,
    lambda_y: f64,
    q_weight: Vec<f64>,
    r_weight: Vec<f64>,
    regions: usize,
}

impl MpcOracle {
    /// Output sequence over `T_ini + N` steps from `x0` under the given
    /// inputs; affine in `(x0, u_f)`.
    fn outputs(&self, x0: &DVector<f64>, us: &[Vec<f64>], ws: &[Vec<f64>]) -> Vec<f64> {
        let mut s = self.sys.clone();
        s.x = x0.clone();
        s.simulate(us, ws).concat()
    }

    fn first_input(&self, u_ini: &[Vec<f64>], w_ini: &[Vec<f64>], y_ini: &[Vec<f64>], w_f: &[Vec<f64>], e: &[f64]) -> Vec<f64> {
        let n = self.sys.state_dim();
        let m = self.sys.b.ncols();
        let p = self.sys.c.nrows();
        let (t, hz) = (self.t_ini, self.horizon);
        let dim = n + m * hz;
        let ws: Vec<Vec<f64>> = w_ini.iter().chain(w_f).cloned().collect();

        let split = |z: &DVector<f64>| {
            let x0 = z.rows(0, n).into_owned();
            let mut us: Vec<Vec<f64>> = u_ini.to_vec();
            for i in 0..hz {
                us.push(z.rows(n + i * m, m).iter().copied().collect());
            }
            (x0, us)
        };
        let base = self.outputs(&DVector::zeros(n), &split(&DVector::zeros(dim)).1, &ws);
        // columns of the linear map from z to the stacked outputs
        let zero_w = vec![vec![0.0; ws[0].len()]; t + hz];
        let mut lin = DMatrix::zeros((t + hz) * p, dim);
        for k in 0..dim {
            let mut z = DVector::zeros(dim);
            z[k] = 1.0;
            let (x0, mut us) = split(&z);
            for u in us.iter_mut().take(t) {
                u.iter_mut().for_each(|v| *v = 0.0);
            }
            let col = self.outputs(&x0, &us, &zero_w);
            lin.column_mut(k).copy_from_slice(&col);
        }
        let o_ini = lin.rows(0, t * p).into_owned();
        let f = lin.rows(t * p, hz * p).into_owned();
        let y_ini_flat = DVector::from_vec(y_ini.concat());
        let const_ini = DVector::from_column_slice(&base[..t * p]);
        let const_f = DVector::from_column_slice(&base[t * p..]);

        let eps = 1e-8;
        let mut hess = o_ini.tr_mul(&o_ini) * (2.0 * self.lambda_y);
        for i in 0..dim {
            hess[(i, i)] += 2.0 * eps;
        }
        let q_rep = DVector::from_iterator(hz * p, (0..hz).flat_map(|_| self.q_weight.clone()));
        let mut c = o_ini.tr_mul(&(const_ini.clone() - &y_ini_flat)) * (2.0 * self.lambda_y) - f.tr_mul(&q_rep) * self.alpha;
        for i in 0..hz {
            for j in 0..m {
                c[n + i * m + j] += self.r_weight[j];
            }
        }
        let r = self.regions;
        let mut a_eq = DMatrix::zeros(hz * r, dim);
        let mut b_eq = DVector::zeros(hz * r);
        for i in 0..hz {
            for a in 0..r {
                for b in 0..r {
                    a_eq[(i * r + a, n + i * m + a * r + b)] = 1.0;
                }
                b_eq[i * r + a] = e[a];
            }
        }
        let mut g = DMatrix::zeros(m * hz + p * hz, dim);
        let mut h = DVector::zeros(m * hz + p * hz);
        for k in 0..m * hz {
            g[(k, n + k)] = -1.0;
        }
        g.rows_mut(m * hz, p * hz).copy_from(&(-&f));
        h.rows_mut(m * hz, p * hz).copy_from(&const_f);
        let qp = QProblem {
            hessian: Hessian::Dense(hess),
            c,
            constant: 0.0,
            a_eq,
            b_eq,
            g,
            h,
        };
        let sol = solve_qp(&qp, &QpSettings { tol: 1e-9, max_iter: 10_000 }).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        sol.x.rows(n, m).iter().copied().collect()
    }
}

/// Largest first-input deviation between the data-driven and model-based
/// controllers over a closed-loop run.
pub fn closed_loop_deviation(seed: u64) -> f64 {
    let (r, n) = (2, 4);
    let (m, q, p) = (r * r, 2 * r, r);
    let (t_ini, horizon, steps) = (6, 5, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = LtiOracle::random_positive(n, m, q, p, &mut rng);

    let t_d = 300;
    let u = random_signal(&mut rng, t_d, m, 2.0);
    let w = random_signal(&mut rng, t_d, q, 2.0);
    let y = sys.simulate(&u, &w);
    let data = CollectedData::new(series(&u), series(&w), series(&y)).unwrap();
    let hankels = data.hankels(t_ini, horizon, Some(n)).unwrap();
    assert!(hankels.persistently_exciting);

    let q_weight = vec![0.6, 0.4];
    let r_weight = vec![0.0, 0.02, 0.03, 0.0];
    let params = DeepcParams {
        t_ini,
        horizon,
        lambda_g: 1e-8,
        lambda_y: 1.0,
        alpha: 1.0,
        q_weight: q_weight.clone(),
        r_weight: r_weight.clone(),
        budget_steps: horizon,
    };
    let model = Arc::new(DeepcModel::new(hankels, params, QpSettings { tol: 1e-9, max_iter: 10_000 }).unwrap());
    let mut deepc = DeepcController::new(model, &data).unwrap();

    let mpc = MpcOracle {
        sys: sys.clone(),
        t_ini,
        horizon,
        alpha: 1.0,
        lambda_y: 1.0,
        q_weight,
        r_weight,
        regions: r,
    };
    let w_run = random_signal(&mut rng, steps + horizon, q, 2.0);
    let budgets: Vec<[f64; 2]> = (0..steps).map(|_| [rng.random_range(0..6) as f64, rng.random_range(0..6) as f64]).collect();

    let mut sys_a = sys.clone();
    let mut sys_b = sys.clone();
    let (mut u_b, mut w_b, mut y_b) = (u[t_d - t_ini..].to_vec(), w[t_d - t_ini..].to_vec(), y[t_d - t_ini..].to_vec());
    let mut worst: f64 = 0.0;
    for k in 0..steps {
        let w_f: Vec<Vec<f64>> = w_run[k..k + horizon].to_vec();
        let e = budgets[k];
        let plan = deepc.plan(&w_f.concat(), &e).unwrap();
        let ya = sys_a.step(&plan.u_first, &w_run[k]);
        deepc.observe(&w_run[k], &ya).unwrap();

        let ub = mpc.first_input(&u_b, &w_b, &y_b, &w_f, &e);
        let yb = sys_b.step(&ub, &w_run[k]);
        for (buf, v) in [(&mut u_b, ub.clone()), (&mut w_b, w_run[k].clone()), (&mut y_b, yb)] {
            buf.remove(0);
            buf.push(v);
        }
        let dev = plan.u_first.iter().zip(&ub).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    worst
}

