//! Dense strictly convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀP x + cᵀx + constant
//! subject to  A_eq x = b_eq,   G x ≤ h
//! ```
//!
//! with a range-space dual active-set method. The Hessian inverse is applied
//! to the constraint normals once, the equality block of the dual Hessian is
//! factored with diagonal pivoting (dependent equality rows are detected and
//! dropped), and the inequality multipliers are found by a Goldfarb–Idnani
//! style dual active-set iteration on the Schur complement. Everything except
//! the right-hand sides is cached in a [`QpWorkspace`], so a sequence of
//! problems that share `P`, `A_eq` and `G` only pays for the factorisation
//! once.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Hessian of the objective.
#[derive(Debug, Clone)]
pub enum Hessian {
    Dense(DMatrix<f64>),
    /// `diag·I + gram·FᵀF`, inverted with the Woodbury identity.
    ScaledGram {
        diag: f64,
        gram: f64,
        factor: DMatrix<f64>,
    },
}

impl Hessian {
    pub fn dim(&self) -> usize {
        match self {
            Hessian::Dense(p) => p.nrows(),
            Hessian::ScaledGram { factor, .. } => factor.ncols(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Hessian::Dense(p) => p * x,
            Hessian::ScaledGram { diag, gram, factor } => {
                let fx = factor * x;
                x * *diag + factor.tr_mul(&fx) * *gram
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Hessian::Dense(p) => p.clone(),
            Hessian::ScaledGram { diag, gram, factor } => {
                let mut p = factor.tr_mul(factor) * *gram;
                for i in 0..p.nrows() {
                    p[(i, i)] += diag;
                }
                p
            }
        }
    }

    fn inverse(&self) -> Result<InverseHessian> {
        match self {
            Hessian::Dense(p) => {
                if p.nrows() != p.ncols() {
                    return Err(Error::Dimension("hessian must be square".into()));
                }
                Cholesky::new(p.clone())
                    .map(InverseHessian::Dense)
                    .ok_or(Error::NotPositiveDefinite)
            }
            Hessian::ScaledGram { diag, gram, factor } => {
                if !(*diag > 0.0) || *gram < 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                if *gram == 0.0 || factor.nrows() == 0 {
                    return Ok(InverseHessian::Scaled(*diag));
                }
                let mut inner = factor * factor.transpose();
                let shift = diag / gram;
                for i in 0..inner.nrows() {
                    inner[(i, i)] += shift;
                }
                let inner = Cholesky::new(inner).ok_or(Error::NotPositiveDefinite)?;
                Ok(InverseHessian::Woodbury {
                    diag: *diag,
                    factor: factor.clone(),
                    inner,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
enum InverseHessian {
    Dense(Cholesky<f64, Dyn>),
    Scaled(f64),
    Woodbury {
        diag: f64,
        factor: DMatrix<f64>,
        inner: Cholesky<f64, Dyn>,
    },
}

impl InverseHessian {
    fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InverseHessian::Dense(ch) => ch.solve(rhs),
            InverseHessian::Scaled(d) => rhs / *d,
            InverseHessian::Woodbury {
                diag,
                factor,
                inner,
            } => {
                let t = inner.solve(&(factor * rhs));
                (rhs - factor.tr_mul(&t)) / *diag
            }
        }
    }

    fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            InverseHessian::Dense(ch) => ch.solve(rhs),
            InverseHessian::Scaled(d) => rhs / *d,
            InverseHessian::Woodbury {
                diag,
                factor,
                inner,
            } => {
                let t = inner.solve(&(factor * rhs));
                (rhs - factor.tr_mul(&t)) / *diag
            }
        }
    }
}

/// A quadratic program in the form described in the module docs.
#[derive(Debug, Clone)]
pub struct QProblem {
    pub hessian: Hessian,
    pub c: DVector<f64>,
    pub constant: f64,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QProblem {
    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.hessian.apply(x)) + self.c.dot(x) + self.constant
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Dimension(what.to_string()))
            }
        };
        check(self.c.len() == n, "linear cost length differs from hessian dimension")?;
        check(
            self.a_eq.nrows() == 0 || self.a_eq.ncols() == n,
            "equality matrix column count differs from decision dimension",
        )?;
        check(self.a_eq.nrows() == self.b_eq.len(), "equality row count differs from rhs length")?;
        check(
            self.g.nrows() == 0 || self.g.ncols() == n,
            "inequality matrix column count differs from decision dimension",
        )?;
        check(self.g.nrows() == self.h.len(), "inequality row count differs from rhs length")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Bound on every KKT residual for a solution to count as optimal.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone)]
pub struct QSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    /// `‖A_eq x − b_eq‖∞`
    pub eq_residual: f64,
    /// `max(0, max_i (G x − h)_i)`
    pub ineq_violation: f64,
    /// `‖P x + c + A_eqᵀ ν + Gᵀ λ‖∞`
    pub stationarity: f64,
    /// `max_i |λ_i (G x − h)_i|`
    pub complementarity: f64,
    pub objective: f64,
    pub eq_dual: DVector<f64>,
    pub ineq_dual: DVector<f64>,
}

impl QSolution {
    pub fn primal_residual(&self) -> f64 {
        self.eq_residual.max(self.ineq_violation)
    }

    pub fn dual_residual(&self) -> f64 {
        self.stationarity.max(self.complementarity)
    }

    pub fn max_residual(&self) -> f64 {
        self.primal_residual().max(self.dual_residual())
    }
}

/// Cached factorisations for problems sharing `P`, `A_eq` and `G`.
#[derive(Debug, Clone)]
pub struct QpWorkspace {
    hessian: Hessian,
    inverse: InverseHessian,
    a_eq: DMatrix<f64>,
    g: DMatrix<f64>,
    /// Equality rows kept as independent, in pivot order.
    kept: Vec<usize>,
    /// Lower Cholesky factor of the kept equality block of the dual Hessian.
    eq_factor: DMatrix<f64>,
    /// `P⁻¹ A_keptᵀ`
    x_eq: DMatrix<f64>,
    /// `P⁻¹ Gᵀ`
    x_in: DMatrix<f64>,
    /// `M_SS⁻¹ M_Si`
    w: DMatrix<f64>,
    /// Schur complement of the inequality block.
    k: DMatrix<f64>,
}

impl QpWorkspace {
    pub fn new(hessian: Hessian, a_eq: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let n = hessian.dim();
        let a_eq = if a_eq.nrows() == 0 { DMatrix::zeros(0, n) } else { a_eq };
        let g = if g.nrows() == 0 { DMatrix::zeros(0, n) } else { g };
        if a_eq.ncols() != n || g.ncols() != n {
            return Err(Error::Dimension(format!(
                "constraint matrices have {} and {} columns, decision dimension is {n}",
                a_eq.ncols(),
                g.ncols()
            )));
        }
        let inverse = hessian.inverse()?;

        let x_eq_all = inverse.solve_mat(&a_eq.transpose());
        let m_ee = &a_eq * &x_eq_all;
        let (kept, eq_factor) = pivoted_cholesky(&m_ee);
        let x_eq = x_eq_all.select_columns(kept.iter());
        let a_kept = a_eq.select_rows(kept.iter());

        let x_in = inverse.solve_mat(&g.transpose());
        let m_ii = &g * &x_in;
        let m_si = &a_kept * &x_in;
        let w = cholesky_solve(&eq_factor, &m_si);
        let mut k = m_ii - m_si.tr_mul(&w);
        symmetrize(&mut k);

        Ok(QpWorkspace {
            hessian,
            inverse,
            a_eq,
            g,
            kept,
            eq_factor,
            x_eq,
            x_in,
            w,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn eq_rows(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn ineq_rows(&self) -> usize {
        self.g.nrows()
    }

    /// Number of equality rows found linearly independent.
    pub fn eq_rank(&self) -> usize {
        self.kept.len()
    }

    pub fn solve(
        &self,
        c: &DVector<f64>,
        constant: f64,
        b_eq: &DVector<f64>,
        h: &DVector<f64>,
        settings: &QpSettings,
    ) -> Result<QSolution> {
        let n = self.dim();
        if c.len() != n || b_eq.len() != self.eq_rows() || h.len() != self.ineq_rows() {
            return Err(Error::Dimension(format!(
                "rhs lengths ({}, {}, {}) do not match workspace ({n}, {}, {})",
                c.len(),
                b_eq.len(),
                h.len(),
                self.eq_rows(),
                self.ineq_rows()
            )));
        }
        let x_c = self.inverse.solve_vec(c);
        let b_kept = DVector::from_iterator(self.kept.len(), self.kept.iter().map(|&i| b_eq[i]));
        let q_s = self.a_eq.select_rows(self.kept.iter()) * &x_c + b_kept;
        let q_i = &self.g * &x_c + h;
        let z = cholesky_solve_vec(&self.eq_factor, &q_s);
        let q_hat = q_i - self.w.tr_mul(&q_s);

        // The dual works on slacks that lose precision when the Hessian is
        // poorly conditioned. After each optimal pass the primal point is
        // refined and the dual restarted from the exact slacks `h - Gx`.
        const ROUNDS: usize = 8;
        let mut start = DualStart {
            lambda: DVector::zeros(self.ineq_rows()),
            active: Vec::new(),
            s0: q_hat,
        };
        let mut iterations = 0;
        let mut round = 0;
        let (x, nu_s, lambda, dual_status) = loop {
            let (mut lambda, status, used, active) = dual_active_set(&self.k, start, settings);
            iterations += used;
            round += 1;
            let mut nu_s = -(&z + &self.w * &lambda);
            let mut x = -(&x_c + &self.x_eq * &nu_s + &self.x_in * &lambda);
            if status != QpStatus::Optimal {
                break (x, nu_s, lambda, status);
            }
            self.refine(&mut x, &mut nu_s, &mut lambda, &active, c, b_eq, h);
            let s0 = h - &self.g * &x;
            let violated = (0..s0.len()).any(|i| s0[i] < -0.1 * settings.tol * (1.0 + h[i].abs()));
            if !violated || round == ROUNDS {
                break (x, nu_s, lambda, status);
            }
            start = DualStart { lambda: lambda.clone(), active, s0 };
        };

        let mut eq_dual = DVector::zeros(self.eq_rows());
        for (pos, &row) in self.kept.iter().enumerate() {
            eq_dual[row] = nu_s[pos];
        }

        let eq_res = &self.a_eq * &x - b_eq;
        let eq_residual = eq_res.amax();
        let slack = &self.g * &x - h;
        let ineq_violation = slack.iter().copied().fold(0.0, f64::max);
        let grad = self.hessian.apply(&x) + c + self.a_eq.tr_mul(&eq_dual) + self.g.tr_mul(&lambda);
        let stationarity = grad.amax();
        let complementarity = lambda
            .iter()
            .zip(slack.iter())
            .map(|(l, s)| (l * s).abs())
            .fold(0.0, f64::max);
        let objective = 0.5 * x.dot(&self.hessian.apply(&x)) + c.dot(&x) + constant;

        // Residuals are judged against an absolute-plus-relative scale.
        let tol = settings.tol;
        let eq_scale = 1.0 + b_eq.amax();
        let status = match dual_status {
            QpStatus::Infeasible => QpStatus::Infeasible,
            _ if eq_residual > tol * eq_scale && self.kept.len() < self.eq_rows() => {
                let dropped_violated = (0..self.eq_rows())
                    .filter(|i| !self.kept.contains(i))
                    .any(|i| eq_res[i].abs() > tol * eq_scale);
                if dropped_violated {
                    QpStatus::Infeasible
                } else {
                    QpStatus::MaxIter
                }
            }
            QpStatus::MaxIter => QpStatus::MaxIter,
            QpStatus::Optimal => {
                let grad_scale = 1.0 + c.amax();
                let h_scale = 1.0 + h.amax();
                if eq_residual <= tol * eq_scale
                    && ineq_violation <= tol * h_scale
                    && stationarity <= tol * grad_scale
                    && complementarity <= tol * h_scale.max(grad_scale)
                {
                    QpStatus::Optimal
                } else {
                    QpStatus::MaxIter
                }
            }
        };

        Ok(QSolution {
            x,
            status,
            iterations,
            eq_residual,
            ineq_violation,
            stationarity,
            complementarity,
            objective,
            eq_dual,
            ineq_dual: lambda,
        })
    }

    /// Iterative refinement of the KKT system restricted to the kept
    /// equalities and the final active set. The range-space products lose
    /// accuracy when the Hessian is badly conditioned; each pass reuses the
    /// cached factors to correct the current residual.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        x: &mut DVector<f64>,
        nu_s: &mut DVector<f64>,
        lambda: &mut DVector<f64>,
        active: &[usize],
        c: &DVector<f64>,
        b_eq: &DVector<f64>,
        h: &DVector<f64>,
    ) {
        const PASSES: usize = 50;
        let ns = self.kept.len();
        let na = active.len();
        if ns + na == 0 {
            return;
        }
        let k_aa = DMatrix::from_fn(na, na, |i, j| self.k[(active[i], active[j])]);
        let Some(k_aa) = Cholesky::new(k_aa) else { return };
        let a_s = self.a_eq.select_rows(self.kept.iter());
        let g_a = self.g.select_rows(active.iter());
        let b_s = DVector::from_iterator(ns, self.kept.iter().map(|&i| b_eq[i]));
        let h_a = DVector::from_iterator(na, active.iter().map(|&i| h[i]));
        let w_a = self.w.select_columns(active.iter());
        let x_a = self.x_in.select_columns(active.iter());

        let dual_scale = 1.0 + c.amax();
        let primal_scale = 1.0 + b_s.amax().max(h_a.amax());
        let residuals = |x: &DVector<f64>, nu: &DVector<f64>, lambda: &DVector<f64>| {
            let lam_a = DVector::from_iterator(na, active.iter().map(|&i| lambda[i]));
            let r_d = self.hessian.apply(x) + c + a_s.tr_mul(nu) + g_a.tr_mul(&lam_a);
            let r_s = &a_s * x - &b_s;
            let r_a = &g_a * x - &h_a;
            let size = (r_d.amax() / dual_scale).max(r_s.amax().max(r_a.amax()) / primal_scale);
            (r_d, r_s, r_a, size)
        };
        let (mut r_d, mut r_s, mut r_a, mut size) = residuals(x, nu_s, lambda);
        let mut best = (x.clone(), nu_s.clone(), lambda.clone(), size);
        let mut since_best = 0;
        for _ in 0..PASSES {
            if size <= f64::EPSILON || since_best >= 3 {
                break;
            }
            let t = self.inverse.solve_vec(&r_d);
            let rhs_s = &r_s - &a_s * &t;
            let rhs_a = &r_a - &g_a * &t;
            let d_lam = k_aa.solve(&(rhs_a - w_a.tr_mul(&rhs_s)));
            let d_nu = cholesky_solve_vec(&self.eq_factor, &rhs_s) - &w_a * &d_lam;
            let dx = -(t + &self.x_eq * &d_nu + &x_a * &d_lam);
            *x += dx;
            *nu_s += d_nu;
            for (pos, &i) in active.iter().enumerate() {
                lambda[i] += d_lam[pos];
            }
            (r_d, r_s, r_a, size) = residuals(x, nu_s, lambda);
            if size < 0.9 * best.3 {
                best = (x.clone(), nu_s.clone(), lambda.clone(), size);
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        if size > best.3 {
            (*x, *nu_s, *lambda) = (best.0, best.1, best.2);
        }
        for &i in active {
            lambda[i] = lambda[i].max(0.0);
        }
    }
}

/// One-shot solve. Returns `Err` only for malformed problems; infeasibility
/// and iteration caps are reported through [`QSolution::status`].
pub fn solve_qp(problem: &QProblem, settings: &QpSettings) -> Result<QSolution> {
    problem.validate()?;
    let ws = QpWorkspace::new(problem.hessian.clone(), problem.a_eq.clone(), problem.g.clone())?;
    ws.solve(&problem.c, problem.constant, &problem.b_eq, &problem.h, settings)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky with diagonal pivoting on a symmetric positive semidefinite
/// matrix. Returns the independent rows in pivot order and the lower factor
/// of the corresponding principal submatrix.
fn pivoted_cholesky(a: &DMatrix<f64>) -> (Vec<usize>, DMatrix<f64>) {
    let k = a.nrows();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag: Vec<f64> = (0..k).map(|i| a[(i, i)]).collect();
    let max_diag = diag.iter().copied().fold(0.0, f64::max);
    let threshold = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    // rows[i] holds row i (in pivot order) of the factor, columns 0..rank
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(k); k];
    let mut rank = 0;
    for j in 0..k {
        let (p, &dp) = diag[j..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, d)| (i + j, d))
            .unwrap();
        if !(dp > threshold) {
            break;
        }
        perm.swap(j, p);
        diag.swap(j, p);
        rows.swap(j, p);
        let pivot = dp.sqrt();
        rows[j].push(pivot);
        let (head, tail) = rows.split_at_mut(j + 1);
        let row_j = &head[j];
        let pj = perm[j];
        for (offset, row_i) in tail.iter_mut().enumerate() {
            let i = j + 1 + offset;
            let dot: f64 = row_i.iter().zip(&row_j[..j]).map(|(x, y)| x * y).sum();
            let l = (a[(perm[i], pj)] - dot) / pivot;
            row_i.push(l);
            diag[i] -= l * l;
        }
        rank += 1;
    }
    let mut factor = DMatrix::zeros(rank, rank);
    for i in 0..rank {
        for t in 0..=i {
            factor[(i, t)] = rows[i][t];
        }
    }
    perm.truncate(rank);
    (perm, factor)
}

fn cholesky_solve(l: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if l.nrows() == 0 {
        return DMatrix::zeros(0, rhs.ncols());
    }
    let y = l.solve_lower_triangular(rhs).expect("nonsingular factor");
    l.tr_solve_lower_triangular(&y).expect("nonsingular factor")
}

fn cholesky_solve_vec(l: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if l.nrows() == 0 {
        return DVector::zeros(0);
    }
    let y = l.solve_lower_triangular(rhs).expect("nonsingular factor");
    l.tr_solve_lower_triangular(&y).expect("nonsingular factor")
}

/// Growing Cholesky factor of the Gram matrix of the active constraints.
struct ActiveFactor {
    rows: Vec<Vec<f64>>,
}

impl ActiveFactor {
    fn forward(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rhs.len());
        for (i, row) in self.rows.iter().enumerate() {
            let dot: f64 = row[..i].iter().zip(&out).map(|(a, b)| a * b).sum();
            out.push((rhs[i] - dot) / row[i]);
        }
        out
    }

    fn backward(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut out = rhs.to_vec();
        for i in (0..n).rev() {
            out[i] /= self.rows[i][i];
            let v = out[i];
            for (t, o) in out.iter_mut().enumerate().take(i) {
                *o -= self.rows[i][t] * v;
            }
        }
        out
    }

    /// Appends constraint `j` after `active`. Returns false when it is
    /// numerically dependent on them.
    fn push(&mut self, k: &DMatrix<f64>, active: &[usize], j: usize) -> bool {
        let k_aj: Vec<f64> = active.iter().map(|&i| k[(i, j)]).collect();
        let mut row = self.forward(&k_aj);
        let dd = k[(j, j)] - row.iter().map(|v| v * v).sum::<f64>();
        if !(dd > NOISE * k[(j, j)]) {
            return false;
        }
        row.push(dd.sqrt());
        self.rows.push(row);
        true
    }

    /// Deletes the row for active position `pos` and rebuilds the rows
    /// below it. Returns false on loss of positive definiteness.
    fn remove(&mut self, pos: usize, k: &DMatrix<f64>, active: &[usize]) -> bool {
        self.rows.remove(pos);
        for i in pos..active.len() {
            let mut row = std::mem::take(&mut self.rows[i]);
            row.truncate(pos);
            for t in pos..=i {
                let v = if t == i {
                    k[(active[i], active[i])] - row.iter().map(|a| a * a).sum::<f64>()
                } else {
                    k[(active[i], active[t])]
                        - row[..t].iter().zip(&self.rows[t][..t]).map(|(a, b)| a * b).sum::<f64>()
                };
                if t == i {
                    if !(v > 0.0) {
                        return false;
                    }
                    row.push(v.sqrt());
                } else {
                    row.push(v / self.rows[t][t]);
                }
            }
            self.rows[i] = row;
        }
        true
    }
}

/// Relative size of rounding noise in dual slacks and step directions.
const NOISE: f64 = 1e-9;

/// Starting point of the dual iteration: multipliers, the active set, and
/// the slacks `s0` at those multipliers.
struct DualStart {
    lambda: DVector<f64>,
    active: Vec<usize>,
    s0: DVector<f64>,
}

/// Dual active-set iteration for
/// `min ½ λᵀKλ + q̂ᵀλ, λ ≥ 0` with slacks `s = Kλ + q̂`. `K` is treated as
/// the Gram matrix of a set of constraint normals, so a singular `K`
/// (dependent inequalities) is handled like in the primal method.
///
/// Slacks are tracked as `s0 + K(λ - λ0)`, so a warm start with accurate
/// `s0` keeps their rounding error proportional to the increments only.
fn dual_active_set(
    k: &DMatrix<f64>,
    start: DualStart,
    settings: &QpSettings,
) -> (DVector<f64>, QpStatus, usize, Vec<usize>) {
    let DualStart { mut lambda, mut active, s0 } = start;
    let m = s0.len();
    if m == 0 {
        return (lambda, QpStatus::Optimal, 0, Vec::new());
    }
    let lambda0 = lambda.clone();
    let norms: Vec<f64> = (0..m).map(|i| k[(i, i)].max(0.0).sqrt()).collect();
    let mut factor = ActiveFactor { rows: Vec::new() };
    let mut is_active = vec![false; m];
    let warm = std::mem::take(&mut active);
    for j in warm {
        if factor.push(k, &active, j) {
            active.push(j);
            is_active[j] = true;
        } else {
            lambda[j] = 0.0;
        }
    }
    let tol = settings.tol * 1e-3;
    let mut iterations = 0;

    // Slacks together with the magnitude of the terms summed into them,
    // which sets the scale of their rounding error.
    let slacks = |lambda: &DVector<f64>| {
        let mut s = s0.clone();
        let mut mag = s0.abs();
        for j in 0..m {
            let d = lambda[j] - lambda0[j];
            if d != 0.0 {
                s.axpy(d, &k.column(j), 1.0);
                mag.axpy(d.abs(), &k.column(j).abs(), 1.0);
            }
        }
        (s, mag)
    };

    loop {
        let (s, mag) = slacks(&lambda);
        let mut pick = None;
        let mut worst = 0.0;
        for i in 0..m {
            if is_active[i] || s[i] >= -(tol + NOISE * mag[i]) {
                continue;
            }
            let score = if norms[i] > 0.0 { s[i] / norms[i] } else { f64::NEG_INFINITY };
            if score < worst || pick.is_none() {
                worst = score;
                pick = Some(i);
            }
        }
        let Some(p) = pick else {
            return (lambda, QpStatus::Optimal, iterations, active);
        };
        let mut s_p = s[p];

        loop {
            iterations += 1;
            if iterations > settings.max_iter {
                return (lambda, QpStatus::MaxIter, iterations, active);
            }
            let k_ap: Vec<f64> = active.iter().map(|&j| k[(j, p)]).collect();
            let l = factor.forward(&k_ap);
            let r = factor.backward(&l);
            let dd = k[(p, p)] - l.iter().map(|v| v * v).sum::<f64>();

            let full = if dd > NOISE * k[(p, p)].max(f64::MIN_POSITIVE) {
                -s_p / dd
            } else {
                f64::INFINITY
            };
            let r_floor = NOISE * r.iter().fold(1.0, |a: f64, v| a.max(v.abs()));
            let mut partial = f64::INFINITY;
            let mut blocking = None;
            for (pos, &j) in active.iter().enumerate() {
                if r[pos] > r_floor {
                    let ratio = lambda[j].max(0.0) / r[pos];
                    if ratio < partial {
                        partial = ratio;
                        blocking = Some(pos);
                    }
                }
            }
            if full.is_infinite() && partial.is_infinite() {
                return (lambda, QpStatus::Infeasible, iterations, active);
            }
            let step = full.min(partial);
            for (pos, &j) in active.iter().enumerate() {
                lambda[j] = (lambda[j] - step * r[pos]).max(0.0);
            }
            lambda[p] += step;
            s_p += step * dd;

            if full <= partial {
                let mut row = l;
                row.push(dd.sqrt());
                factor.rows.push(row);
                active.push(p);
                is_active[p] = true;
                break;
            }
            let pos = blocking.expect("partial step has a blocking constraint");
            let j = active.remove(pos);
            lambda[j] = 0.0;
            is_active[j] = false;
            if !factor.remove(pos, k, &active) {
                return (lambda, QpStatus::MaxIter, iterations, active);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn problem(p: DMatrix<f64>, c: &[f64]) -> QProblem {
        let n = p.nrows();
        QProblem {
            hessian: Hessian::Dense(p),
            c: DVector::from_column_slice(c),
            constant: 0.0,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        }
    }

    #[test]
    fn scalar_lower_bound() {
        // min x² s.t. x ≥ 1
        let mut qp = problem(dense(1, 1, &[2.0]), &[0.0]);
        qp.g = dense(1, 1, &[-1.0]);
        qp.h = DVector::from_element(1, -1.0);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.ineq_dual[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_with_equality() {
        // min (x-3)² + (y+1)² s.t. x + y = 1, y ≥ 0
        let mut qp = problem(dense(2, 2, &[2.0, 0.0, 0.0, 2.0]), &[-6.0, 2.0]);
        qp.constant = 10.0;
        qp.a_eq = dense(1, 2, &[1.0, 1.0]);
        qp.b_eq = DVector::from_element(1, 1.0);
        qp.g = dense(1, 2, &[0.0, -1.0]);
        qp.h = DVector::zeros(1);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
        assert!((sol.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn conflicting_equalities_are_infeasible() {
        let mut qp = problem(dense(1, 1, &[2.0]), &[0.0]);
        qp.a_eq = dense(2, 1, &[1.0, 1.0]);
        qp.b_eq = DVector::from_column_slice(&[0.0, 1.0]);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn conflicting_inequalities_are_infeasible() {
        // x ≤ -1 and x ≥ 1
        let mut qp = problem(dense(1, 1, &[2.0]), &[0.0]);
        qp.g = dense(2, 1, &[1.0, -1.0]);
        qp.h = DVector::from_column_slice(&[-1.0, -1.0]);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn duplicate_equalities_are_tolerated() {
        let mut qp = problem(dense(2, 2, &[2.0, 0.0, 0.0, 2.0]), &[0.0, 0.0]);
        qp.a_eq = dense(3, 2, &[1.0, 1.0, 2.0, 2.0, 1.0, -1.0]);
        qp.b_eq = DVector::from_column_slice(&[2.0, 4.0, 0.0]);
        let ws = QpWorkspace::new(qp.hessian.clone(), qp.a_eq.clone(), qp.g.clone()).unwrap();
        assert_eq!(ws.eq_rank(), 2);
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-10 && (sol.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn woodbury_matches_dense() {
        let f = dense(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        let h = Hessian::ScaledGram {
            diag: 0.7,
            gram: 2.5,
            factor: f,
        };
        let rhs = DVector::from_column_slice(&[1.0, -2.0, 0.25]);
        let via_dense = Cholesky::new(h.to_dense()).unwrap().solve(&rhs);
        let via_woodbury = h.inverse().unwrap().solve_vec(&rhs);
        assert!((via_dense - via_woodbury).amax() < 1e-12);
    }

    #[test]
    fn pivoted_cholesky_drops_dependent_rows() {
        let a = dense(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0]);
        let (kept, l) = pivoted_cholesky(&a);
        assert_eq!(kept.len(), 2);
        let sub = a.select_rows(kept.iter()).select_columns(kept.iter());
        assert!((&l * l.transpose() - sub).amax() < 1e-12);
    }

    #[test]
    fn indefinite_hessian_rejected() {
        let qp = problem(dense(2, 2, &[1.0, 0.0, 0.0, -1.0]), &[0.0, 0.0]);
        assert!(matches!(solve_qp(&qp, &QpSettings::default()), Err(Error::NotPositiveDefinite)));
    }
}
