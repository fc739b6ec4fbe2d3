//! Gaussian kernel evaluation and pairwise squared distances.

use crate::data::{DataMatrix, Mat};
use crate::error::{Error, Result};

/// A validated Gaussian kernel bandwidth: finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::Usage(format!(
                "bandwidth must be finite and positive, got {s}"
            )));
        }
        Ok(Self(s))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Gaussian kernel value `exp(-||x - y||^2 / (2 s^2))`.
pub fn kernel_value(x: &[f64], y: &[f64], s: Bandwidth) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        d2 += d * d;
    }
    Ok(kernel_from_dist2(d2, s.get()))
}

/// Kernel value from a precomputed squared distance.
#[inline]
pub fn kernel_from_dist2(d2: f64, s: f64) -> f64 {
    (-d2 / (2.0 * s * s)).exp()
}

/// Squared Euclidean norm of a point.
#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Squared distance via the expanded form, clamped at zero.
#[inline]
pub(crate) fn dist2_expanded(x: &[f64], x_norm2: f64, y: &[f64], y_norm2: f64) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (x_norm2 + y_norm2 - 2.0 * dot).max(0.0)
}

/// All pairwise squared distances between the rows of `a` and the rows of
/// `b`, as an `a.n_rows() x b.n_rows()` matrix.
///
/// Uses the expanded form `||x||^2 + ||y||^2 - 2 x.y` with clamping at zero,
/// so tiny negative round-off never leaks into downstream `exp` calls.
pub fn squared_distances(a: &DataMatrix, b: &DataMatrix) -> Result<Mat> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let a_norms: Vec<f64> = a.rows().map(norm2).collect();
    let b_norms: Vec<f64> = b.rows().map(norm2).collect();
    let mut out = Mat::zeros(a.n_rows(), b.n_rows());
    for i in 0..a.n_rows() {
        let xi = a.row(i);
        let row = out.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = dist2_expanded(xi, a_norms[i], b.row(j), b_norms[j]);
        }
    }
    Ok(out)
}
