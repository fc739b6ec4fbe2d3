//! Dense row-major containers for observations and small numeric matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` matrix of observations: one row per point, one column per
/// feature. All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    n_rows: usize,
    dim: usize,
}

impl DataMatrix {
    /// Builds a matrix from explicit rows. Every row must have the same
    /// length, at least one row is required, and all entries must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InsufficientData("no rows given".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Usage("rows must have at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::Usage(format!("non-finite value in row {i}")));
                }
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            n_rows: rows.len(),
            dim,
        })
    }

    /// Builds a matrix from a flat row-major buffer of length `n_rows * dim`.
    pub fn from_flat(n_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("dimension must be positive".into()));
        }
        if data.len() != n_rows * dim {
            return Err(Error::DimensionMismatch {
                expected: n_rows * dim,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Usage(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(Self { data, n_rows, dim })
    }

    /// Number of observations.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of features per observation.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Borrow row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterate over all rows in order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// The flat row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the selected rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            n_rows: indices.len(),
            dim: self.dim,
        }
    }

    /// Removes exact duplicate rows, keeping the first occurrence of each.
    pub fn dedup_rows(&self) -> Self {
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            if !kept.iter().any(|&j| self.row(j) == self.row(i)) {
                kept.push(i);
            }
        }
        self.select(&kept)
    }

    /// Stacks several matrices with identical column counts.
    pub fn concat(parts: &[&DataMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InsufficientData("nothing to concatenate".into()))?;
        let dim = first.dim;
        let mut data = Vec::new();
        let mut n_rows = 0;
        for part in parts {
            if part.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: part.dim,
                });
            }
            data.extend_from_slice(&part.data);
            n_rows += part.n_rows;
        }
        Ok(Self { data, n_rows, dim })
    }
}

/// A general dense row-major matrix used for kernel and distance blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Mat {
    /// All-zero matrix of the given shape.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    /// Borrow row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Mutable borrow of row `i`.
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// The flat row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    /// Exact bounding rectangle of a two-column data matrix.
    pub fn bounding(data: &DataMatrix) -> Result<Self> {
        if data.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: data.dim(),
            });
        }
        let mut rect = Rect {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for row in data.rows() {
            rect.x_min = rect.x_min.min(row[0]);
            rect.x_max = rect.x_max.max(row[0]);
            rect.y_min = rect.y_min.min(row[1]);
            rect.y_max = rect.y_max.max(row[1]);
        }
        Ok(rect)
    }
}

/// `count` evenly spaced values covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

/// Per-column affine transform to zero mean and unit spread.
///
/// Columns with zero spread are centered but not rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and population standard deviations.
    pub fn fit(data: &DataMatrix) -> Self {
        let p = data.dim();
        let n = data.n_rows() as f64;
        let mut mean = vec![0.0; p];
        for row in data.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; p];
        for row in data.rows() {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    /// Transforms one point.
    pub fn transform_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: point.len(),
            });
        }
        Ok(point
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    /// Transforms every row of a matrix.
    pub fn transform(&self, data: &DataMatrix) -> Result<DataMatrix> {
        if data.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: data.dim(),
            });
        }
        let mut out = Vec::with_capacity(data.n_rows() * data.dim());
        for row in data.rows() {
            for j in 0..row.len() {
                out.push((row[j] - self.mean[j]) / self.std[j]);
            }
        }
        DataMatrix::from_flat(data.n_rows(), data.dim(), out)
    }
}
