use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::data::HankelSet;
use super::hankel::SignalSeries;
use crate::error::{Error, Result};

/// Discrete-time LTI system with a measured disturbance, used only to
/// validate the data-driven controller:
///
/// ```text
/// x⁺ = A x + B u + B_d w
/// y  = C x + D u + D_d w
/// ```
#[derive(Debug, Clone)]
pub struct LtiOracle {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub dd: DMatrix<f64>,
    pub x: DVector<f64>,
}

impl LtiOracle {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        bd: DMatrix<f64>,
        dd: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let (m, q, p) = (b.ncols(), bd.ncols(), c.nrows());
        let ok = a.ncols() == n
            && b.nrows() == n
            && bd.nrows() == n
            && c.ncols() == n
            && d.shape() == (p, m)
            && dd.shape() == (p, q);
        if !ok {
            return Err(Error::Dimension("inconsistent state-space matrices".into()));
        }
        Ok(LtiOracle {
            a,
            b,
            c,
            d,
            bd,
            dd,
            x: DVector::zeros(n),
        })
    }

    /// Random system with nonnegative matrices; `A` is scaled to spectral
    /// norm `0.8`, which bounds its spectral radius by the same.
    pub fn random_positive(n: usize, m: usize, q: usize, p: usize, rng: &mut impl Rng) -> Self {
        let mut mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random::<f64>());
        let mut a = mat(n, n);
        let norm = a.clone().singular_values().max();
        a *= 0.8 / norm;
        let b = mat(n, m);
        let bd = mat(n, q);
        let c = mat(p, n);
        let d = mat(p, m) * 0.1;
        let dd = mat(p, q) * 0.1;
        LtiOracle::new(a, b, c, d, bd, dd).expect("dimensions are consistent by construction")
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn output(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let u = DVector::from_column_slice(u);
        let w = DVector::from_column_slice(w);
        (&self.c * &self.x + &self.d * u + &self.dd * w).iter().copied().collect()
    }

    /// Emits the current output and advances the state.
    pub fn step(&mut self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let y = self.output(u, w);
        let uv = DVector::from_column_slice(u);
        let wv = DVector::from_column_slice(w);
        self.x = &self.a * &self.x + &self.b * uv + &self.bd * wv;
        y
    }

    pub fn simulate(&mut self, us: &[Vec<f64>], ws: &[Vec<f64>]) -> Vec<Vec<f64>> {
        us.iter().zip(ws).map(|(u, w)| self.step(u, w)).collect()
    }
}

/// Least-squares residual of `[U; W; Y] g = col(u, w, y)` over the stacked
/// past and future Hankel blocks, for a trajectory of length `T_ini + N`.
pub fn fundamental_lemma_residual(
    hankels: &HankelSet,
    u: &SignalSeries,
    w: &SignalSeries,
    y: &SignalSeries,
) -> Result<f64> {
    let len = hankels.t_ini + hankels.horizon;
    for s in [u, w, y] {
        if s.len() != len {
            return Err(Error::LengthMismatch(format!(
                "trajectory has length {}, expected {len}",
                s.len()
            )));
        }
    }
    let blocks = [&hankels.up, &hankels.uf, &hankels.wp, &hankels.wf, &hankels.yp, &hankels.yf];
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut h = DMatrix::zeros(rows, hankels.columns());
    let mut at = 0;
    for b in blocks {
        h.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    let flat = |s: &SignalSeries, from: usize, count: usize| -> Vec<f64> {
        (from..from + count).flat_map(|k| s.sample(k)).collect()
    };
    let (t, n) = (hankels.t_ini, hankels.horizon);
    let z: Vec<f64> = [
        flat(u, 0, t),
        flat(u, t, n),
        flat(w, 0, t),
        flat(w, t, n),
        flat(y, 0, t),
        flat(y, t, n),
    ]
    .concat();
    let z = DVector::from_vec(z);

    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = h.nrows().max(h.ncols()) as f64 * f64::EPSILON * smax;
    let g = svd
        .solve(&z, eps)
        .map_err(|e| Error::Invariant(format!("least-squares solve failed: {e}")))?;
    Ok((h * g - z).norm())
}
