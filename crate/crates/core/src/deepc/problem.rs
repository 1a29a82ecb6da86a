use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::HankelSet;
use crate::error::{Error, Result};
use crate::qp::{Hessian, QProblem};

pub const DEFAULT_T_INI: usize = 35;
pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_LAMBDA_G: f64 = 1000.0;
pub const DEFAULT_LAMBDA_Y: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 150.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepcParams {
    pub t_ini: usize,
    pub horizon: usize,
    pub lambda_g: f64,
    pub lambda_y: f64,
    pub alpha: f64,
    /// Output weight, one entry per output.
    pub q_weight: Vec<f64>,
    /// Input weight, one entry per input (flattened transfer lengths).
    pub r_weight: Vec<f64>,
    /// Number of leading horizon steps bound by the vehicle budget.
    pub budget_steps: usize,
}

impl DeepcParams {
    /// Default hyperparameters with the given weights.
    pub fn new(q_weight: Vec<f64>, r_weight: Vec<f64>) -> Self {
        DeepcParams {
            t_ini: DEFAULT_T_INI,
            horizon: DEFAULT_HORIZON,
            lambda_g: DEFAULT_LAMBDA_G,
            lambda_y: DEFAULT_LAMBDA_Y,
            alpha: DEFAULT_ALPHA,
            q_weight,
            r_weight,
            budget_steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_ini == 0 || self.horizon == 0 {
            return Err(Error::Config("initial window and horizon must be positive".into()));
        }
        if !(self.lambda_g > 0.0) || !(self.lambda_y > 0.0) {
            return Err(Error::Config("lambda_g and lambda_y must be positive".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config("alpha must be nonnegative".into()));
        }
        if self.q_weight.iter().chain(&self.r_weight).any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        if self.budget_steps == 0 || self.budget_steps > self.horizon {
            return Err(Error::Config(format!(
                "budget_steps must lie in 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Row-major flattening of a square transfer-length matrix with the
/// diagonal forced to zero.
pub fn flatten_transfer_weights(lengths: &[Vec<f64>]) -> Vec<f64> {
    lengths
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| if i == j { 0.0 } else { v }))
        .collect()
}

fn regions_of(m: usize) -> Result<usize> {
    let r = (m as f64).sqrt().round() as usize;
    if r * r != m || r == 0 {
        return Err(Error::Dimension(format!("input dimension {m} is not a square region count")));
    }
    Ok(r)
}

/// The parts of the condensed problem that depend only on the data and the
/// hyperparameters.
#[derive(Debug, Clone)]
pub struct DeepcStructure {
    pub hessian: Hessian,
    pub a_eq: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Linear cost without the `y_ini` cross term.
    pub base_cost: DVector<f64>,
    pub regions: usize,
}

impl DeepcStructure {
    pub fn new(h: &HankelSet, params: &DeepcParams) -> Result<Self> {
        params.validate()?;
        if params.t_ini != h.t_ini || params.horizon != h.horizon {
            return Err(Error::Dimension(format!(
                "hankels built for ({}, {}), params ask for ({}, {})",
                h.t_ini, h.horizon, params.t_ini, params.horizon
            )));
        }
        if params.q_weight.len() != h.p || params.r_weight.len() != h.m {
            return Err(Error::Dimension(format!(
                "weights have lengths {} and {}, expected {} and {}",
                params.q_weight.len(),
                params.r_weight.len(),
                h.p,
                h.m
            )));
        }
        let regions = regions_of(h.m)?;
        let cols = h.columns();
        let (t_ini, n) = (h.t_ini, h.horizon);

        let budget_rows = regions * params.budget_steps;
        let eq_rows = h.m * t_ini + h.q * t_ini + h.q * n + budget_rows;
        let mut a_eq = DMatrix::zeros(eq_rows, cols);
        let mut at = 0;
        for block in [&h.up, &h.wp, &h.wf] {
            a_eq.rows_mut(at, block.nrows()).copy_from(block);
            at += block.nrows();
        }
        for step in 0..params.budget_steps {
            for i in 0..regions {
                let mut row = a_eq.row_mut(at);
                for j in 0..regions {
                    row += h.uf.row(step * h.m + i * regions + j);
                }
                at += 1;
            }
        }

        let mut g = DMatrix::zeros(h.uf.nrows() + h.yf.nrows(), cols);
        g.rows_mut(0, h.uf.nrows()).copy_from(&(-&h.uf));
        g.rows_mut(h.uf.nrows(), h.yf.nrows()).copy_from(&(-&h.yf));

        let q_rep = DVector::from_iterator(h.p * n, (0..n).flat_map(|_| params.q_weight.iter().copied()));
        let r_rep = DVector::from_iterator(h.m * n, (0..n).flat_map(|_| params.r_weight.iter().copied()));
        let base_cost = h.uf.tr_mul(&r_rep) - h.yf.tr_mul(&q_rep) * params.alpha;

        let hessian = Hessian::ScaledGram {
            diag: 2.0 * params.lambda_g,
            gram: 2.0 * params.lambda_y,
            factor: h.yp.clone(),
        };
        Ok(DeepcStructure {
            hessian,
            a_eq,
            g,
            base_cost,
            regions,
        })
    }
}

/// Measurement-dependent parts of the condensed problem.
#[derive(Debug, Clone)]
pub struct DeepcRhs {
    pub c: DVector<f64>,
    pub constant: f64,
    pub b_eq: DVector<f64>,
    pub h: DVector<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn deepc_rhs(
    hankels: &HankelSet,
    structure: &DeepcStructure,
    params: &DeepcParams,
    u_ini: &[f64],
    w_ini: &[f64],
    y_ini: &[f64],
    w_future: &[f64],
    e: &[f64],
) -> Result<DeepcRhs> {
    let (m, q, p, t_ini, n) = (hankels.m, hankels.q, hankels.p, hankels.t_ini, hankels.horizon);
    for (name, got, want) in [
        ("u_ini", u_ini.len(), m * t_ini),
        ("w_ini", w_ini.len(), q * t_ini),
        ("y_ini", y_ini.len(), p * t_ini),
        ("w_future", w_future.len(), q * n),
        ("e", e.len(), structure.regions),
    ] {
        if got != want {
            return Err(Error::Dimension(format!("{name} has length {got}, expected {want}")));
        }
    }
    if e.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config("empty-vehicle counts must be nonnegative".into()));
    }
    let y_ini_v = DVector::from_column_slice(y_ini);
    let c = &structure.base_cost - hankels.yp.tr_mul(&y_ini_v) * (2.0 * params.lambda_y);
    let constant = params.lambda_y * y_ini_v.norm_squared();
    let b_eq = DVector::from_iterator(
        structure.a_eq.nrows(),
        u_ini
            .iter()
            .chain(w_ini)
            .chain(w_future)
            .copied()
            .chain((0..params.budget_steps).flat_map(|_| e.iter().copied())),
    );
    Ok(DeepcRhs {
        c,
        constant,
        b_eq,
        h: DVector::zeros(structure.g.nrows()),
    })
}

/// The condensed problem in `g` for one receding-horizon step.
#[allow(clippy::too_many_arguments)]
pub fn formulate_deepc_qp(
    hankels: &HankelSet,
    u_ini: &[f64],
    w_ini: &[f64],
    y_ini: &[f64],
    w_future: &[f64],
    e: &[f64],
    params: &DeepcParams,
) -> Result<QProblem> {
    let s = DeepcStructure::new(hankels, params)?;
    let rhs = deepc_rhs(hankels, &s, params, u_ini, w_ini, y_ini, w_future, e)?;
    Ok(QProblem {
        hessian: s.hessian,
        c: rhs.c,
        constant: rhs.constant,
        a_eq: s.a_eq,
        b_eq: rhs.b_eq,
        g: s.g,
        h: rhs.h,
    })
}

/// Inter-regional transfer command for one upper-layer step. All matrices
/// are indexed `[from][to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub u_float: Vec<Vec<f64>>,
    pub u_int: Vec<Vec<u32>>,
    pub theta: Vec<Vec<f64>>,
}

impl ControlCommand {
    /// Every empty vehicle stays in its region.
    pub fn stay(e: &[u32]) -> Self {
        let r = e.len();
        let mut u_int = vec![vec![0; r]; r];
        let mut theta = vec![vec![0.0; r]; r];
        for i in 0..r {
            u_int[i][i] = e[i];
            theta[i][i] = 1.0;
        }
        ControlCommand {
            u_float: vec![vec![0.0; r]; r],
            u_int,
            theta,
        }
    }

    pub fn regions(&self) -> usize {
        self.u_int.len()
    }

    /// `u_int` flattened row-major, as recorded in the input signal.
    pub fn applied_input(&self) -> Vec<f64> {
        self.u_int.iter().flatten().map(|&v| v as f64).collect()
    }
}

/// Turns a first-step input plan into integer transfers and transfer
/// ratios. Off-diagonal counts are floored; the rest of each region's empty
/// vehicles stay.
pub fn command_from_plan(u_first: &[f64], e: &[u32]) -> Result<ControlCommand> {
    let r = e.len();
    if u_first.len() != r * r {
        return Err(Error::Dimension(format!(
            "first-step input has length {}, expected {}",
            u_first.len(),
            r * r
        )));
    }
    let u_float: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..r).map(|j| u_first[i * r + j].max(0.0)).collect())
        .collect();
    let mut u_int = vec![vec![0u32; r]; r];
    let mut theta = vec![vec![0.0; r]; r];
    for i in 0..r {
        let mut moved: u64 = 0;
        for j in 0..r {
            if i != j {
                let v = u_float[i][j].floor();
                u_int[i][j] = v as u32;
                moved += v as u64;
            }
        }
        if moved > e[i] as u64 {
            return Err(Error::Invariant(format!(
                "region {i}: {moved} vehicles sent but only {} available",
                e[i]
            )));
        }
        u_int[i][i] = e[i] - moved as u32;
        let total: f64 = u_float[i].iter().sum();
        if total > 0.0 {
            for j in 0..r {
                theta[i][j] = u_float[i][j] / total;
            }
        } else {
            theta[i][i] = 1.0;
        }
    }
    Ok(ControlCommand {
        u_float,
        u_int,
        theta,
    })
}

/// Reads the first-step input `U^f g` off a solution and converts it.
pub fn extract_command(g: &DVector<f64>, hankels: &HankelSet, e: &[u32]) -> Result<ControlCommand> {
    if g.len() != hankels.columns() {
        return Err(Error::Dimension(format!(
            "decision vector has length {}, expected {}",
            g.len(),
            hankels.columns()
        )));
    }
    let u_first: Vec<f64> = (0..hankels.m).map(|i| hankels.uf.row(i).dot(&g.transpose())).collect();
    command_from_plan(&u_first, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepc::{assemble_hankel_set, SignalSeries};
    use rand::Rng;

    fn random_set(r: usize, t_d: usize, t_ini: usize, n: usize) -> HankelSet {
        let mut rng = crate::rng::seeded(1, 0);
        let mut series = |dim: usize| {
            let s: Vec<Vec<f64>> = (0..t_d).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
            SignalSeries::new(&s).unwrap()
        };
        let (u, w, y) = (series(r * r), series(2 * r), series(r));
        assemble_hankel_set(&u, &w, &y, t_ini, n, None).unwrap()
    }

    #[test]
    fn theta_from_row() {
        let cmd = command_from_plan(&[0.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[5, 0, 0]).unwrap();
        assert_eq!(cmd.theta[0], vec![0.0, 0.4, 0.6]);
        assert_eq!(cmd.u_int[0], vec![0, 2, 3]);
        // zero rows stay
        assert_eq!(cmd.theta[1], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn floors_off_diagonal_and_conserves() {
        let cmd = command_from_plan(&[1.2, 3.7, 0.1, 4.0], &[5, 4]).unwrap();
        assert_eq!(cmd.u_int[0], vec![2, 3]);
        assert_eq!(cmd.u_int[1], vec![0, 4]);
        for row in &cmd.theta {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oversubscribed_row_fails_loudly() {
        assert!(matches!(command_from_plan(&[0.0, 6.0, 0.0, 0.0], &[5, 0]), Err(Error::Invariant(_))));
    }

    #[test]
    fn tiny_negative_entries_clip() {
        let cmd = command_from_plan(&[3.0, -1e-9, 0.0, 2.0], &[3, 2]).unwrap();
        assert_eq!(cmd.u_float[0][1], 0.0);
        assert_eq!(cmd.u_int[0], vec![3, 0]);
    }

    #[test]
    fn equality_row_count_and_dimension() {
        let h = random_set(2, 120, 4, 3);
        let params = DeepcParams {
            t_ini: 4,
            horizon: 3,
            budget_steps: 1,
            ..DeepcParams::new(vec![1.0; 2], vec![0.0, 1.0, 1.0, 0.0])
        };
        let qp = formulate_deepc_qp(
            &h,
            &vec![0.0; 16],
            &vec![0.0; 16],
            &vec![0.0; 8],
            &vec![0.0; 12],
            &[1.0, 1.0],
            &params,
        )
        .unwrap();
        assert_eq!(qp.dim(), h.columns());
        assert_eq!(qp.a_eq.nrows(), 4 * 4 + 4 * 4 + 4 * 3 + 2);
        assert_eq!(qp.g.nrows(), 4 * 3 + 2 * 3);
    }

    #[test]
    fn pure_regularisation_cost() {
        let h = random_set(2, 80, 3, 2);
        let params = DeepcParams {
            t_ini: 3,
            horizon: 2,
            alpha: 0.0,
            lambda_y: 0.5,
            ..DeepcParams::new(vec![1.0; 2], vec![0.0; 4])
        };
        let y_ini: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let qp = formulate_deepc_qp(&h, &[0.0; 12], &[0.0; 12], &y_ini, &[0.0; 8], &[0.0, 0.0], &params).unwrap();
        let expected = -h.yp.tr_mul(&DVector::from_column_slice(&y_ini)) * (2.0 * 0.5);
        assert!((qp.c - expected).amax() < 1e-12);
        assert!((qp.constant - 0.5 * 55.0).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_unsubstituted_form() {
        let h = random_set(2, 90, 3, 2);
        let params = DeepcParams {
            t_ini: 3,
            horizon: 2,
            ..DeepcParams::new(vec![0.3, 0.7], flatten_transfer_weights(&[vec![9.0, 1.5], vec![2.5, 9.0]]))
        };
        let mut rng = crate::rng::seeded(3, 0);
        let y_ini: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let qp = formulate_deepc_qp(&h, &[0.0; 12], &[0.0; 12], &y_ini, &[0.0; 8], &[0.0; 2], &params).unwrap();
        let g = DVector::from_fn(h.columns(), |_, _| rng.random::<f64>() - 0.5);
        let u = &h.uf * &g;
        let y = &h.yf * &g;
        let dy = &h.yp * &g - DVector::from_column_slice(&y_ini);
        let mut direct = params.lambda_g * g.norm_squared() + params.lambda_y * dy.norm_squared();
        for i in 0..2 {
            for j in 0..2 {
                direct -= params.alpha * params.q_weight[j] * y[i * 2 + j];
            }
            for j in 0..4 {
                direct += params.r_weight[j] * u[i * 4 + j];
            }
        }
        assert!((qp.objective(&g) - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn flattened_weights_drop_diagonal() {
        assert_eq!(
            flatten_transfer_weights(&[vec![1.0, 2.0], vec![3.0, 4.0]]),
            vec![0.0, 2.0, 3.0, 0.0]
        );
    }
}
