use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A time-ordered sequence of equal-length sample vectors, stored as the
/// columns of a `dim × T` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    data: DMatrix<f64>,
}

impl SignalSeries {
    pub fn new(samples: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::TooShort { len: 0, needed: 1 });
        };
        let dim = first.len();
        if let Some(bad) = samples.iter().position(|s| s.len() != dim) {
            return Err(Error::LengthMismatch(format!(
                "sample {bad} has dimension {}, expected {dim}",
                samples[bad].len()
            )));
        }
        Ok(SignalSeries {
            data: DMatrix::from_fn(dim, samples.len(), |i, k| samples[k][i]),
        })
    }

    /// Wraps a matrix whose columns are the samples.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::TooShort { len: 0, needed: 1 });
        }
        Ok(SignalSeries { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample(&self, k: usize) -> Vec<f64> {
        self.data.column(k).iter().copied().collect()
    }

    pub fn samples(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.sample(k)).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// The last `n` samples, oldest first.
    pub fn tail(&self, n: usize) -> Vec<Vec<f64>> {
        let start = self.len().saturating_sub(n);
        (start..self.len()).map(|k| self.sample(k)).collect()
    }

    /// Stacks two series of the same length sample-wise.
    pub fn stack(&self, other: &SignalSeries) -> Result<SignalSeries> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(format!(
                "series lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        let mut data = DMatrix::zeros(self.dim() + other.dim(), self.len());
        data.rows_mut(0, self.dim()).copy_from(&self.data);
        data.rows_mut(self.dim(), other.dim()).copy_from(&other.data);
        Ok(SignalSeries { data })
    }
}

/// Block-Hankel matrix of depth `l`: column `j` stacks samples `j..j+l`.
pub fn build_hankel(series: &SignalSeries, l: usize) -> Result<DMatrix<f64>> {
    if l == 0 {
        return Err(Error::Config("hankel depth must be at least 1".into()));
    }
    let t = series.len();
    if t < l {
        return Err(Error::TooShort { len: t, needed: l });
    }
    let dim = series.dim();
    let cols = t - l + 1;
    let mut h = DMatrix::zeros(dim * l, cols);
    for j in 0..cols {
        for i in 0..l {
            h.view_mut((i * dim, j), (dim, 1))
                .copy_from(&series.data.column(j + i));
        }
    }
    Ok(h)
}

/// Numerical rank with threshold `max(rows, cols)·ε·σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = if m.nrows() <= m.ncols() {
        m.transpose().singular_values()
    } else {
        m.clone().singular_values()
    };
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let threshold = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > threshold).count()
}

/// Whether the depth-`l` Hankel matrix of `series` has full row rank.
pub fn is_persistently_exciting(series: &SignalSeries, l: usize) -> Result<bool> {
    let h = build_hankel(series, l)?;
    Ok(numerical_rank(&h) == h.nrows())
}
