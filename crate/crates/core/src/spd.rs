//! Small dense symmetric positive definite solves with ridge escalation.
//!
//! Landmark kernel matrices become numerically singular at large bandwidths,
//! so every factorization adds a ridge `ridge * I`. If factoring fails or the
//! solution's relative residual exceeds [`RESIDUAL_TOL`], the ridge escalates
//! by a factor of ten up to [`RIDGE_CAP`]; past the cap the solve reports a
//! numerical failure with condition diagnostics.

use crate::data::Mat;
use crate::error::{Error, Result};

/// Default starting ridge.
pub const DEFAULT_RIDGE: f64 = 1e-10;
/// Largest ridge the escalation ladder will try.
pub const RIDGE_CAP: f64 = 1e-6;
/// Maximum relative residual accepted for a solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// A symmetric positive (semi-)definite matrix, validated for symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    /// Wraps a square matrix, requiring symmetry to within `1e-12` relative.
    pub fn from_mat(m: &Mat) -> Result<Self> {
        if m.n_rows() != m.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: m.n_rows(),
                got: m.n_cols(),
            });
        }
        for i in 0..m.n_rows() {
            for j in (i + 1)..m.n_cols() {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Usage(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self {
            order: m.n_rows(),
            data: m.as_slice().to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }
}

/// Lower-triangular Cholesky factor of `M + ridge_applied * I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    order: usize,
    l: Vec<f64>,
    /// Ridge actually added to the diagonal before factoring.
    pub ridge_applied: f64,
}

/// Result of [`spd_solve`]: solution columns plus the ridge that was used.
#[derive(Debug, Clone)]
pub struct SpdSolve {
    /// One solution column per right-hand-side column.
    pub solutions: Mat,
    /// Ridge actually added to the diagonal.
    pub ridge_applied: f64,
}

fn try_cholesky(m: &SpdMatrix, ridge: f64) -> Option<Vec<f64>> {
    let n = m.order;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m.get(j, j) + ridge;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut v = m.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    Some(l)
}

fn next_ridge(ridge: f64) -> f64 {
    if ridge == 0.0 {
        DEFAULT_RIDGE
    } else {
        ridge * 10.0
    }
}

impl SpdFactor {
    /// Factors `m + ridge * I`, escalating the ridge tenfold on failure up to
    /// [`RIDGE_CAP`].
    pub fn new(m: &SpdMatrix, ridge: f64) -> Result<Self> {
        if !(0.0..=RIDGE_CAP).contains(&ridge) {
            return Err(Error::Usage(format!(
                "ridge must lie in [0, {RIDGE_CAP}], got {ridge}"
            )));
        }
        let mut r = ridge;
        while r <= RIDGE_CAP * (1.0 + 1e-9) {
            if let Some(l) = try_cholesky(m, r) {
                return Ok(Self {
                    order: m.order,
                    l,
                    ridge_applied: r,
                });
            }
            r = next_ridge(r);
        }
        Err(Error::Numerical(condition_report(m)))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Forward substitution: solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.order;
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[i * n + k] * b[k];
            }
            b[i] = v / self.l[i * n + i];
        }
    }

    /// Back substitution: solves `L^T x = y` in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        let n = self.order;
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * y[k];
            }
            y[i] = v / self.l[i * n + i];
        }
    }

    /// Full solve of `(M + ridge I) x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }
}

fn condition_report(m: &SpdMatrix) -> String {
    let n = m.order;
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    let mut off = f64::NEG_INFINITY;
    for i in 0..n {
        dmin = dmin.min(m.get(i, i));
        dmax = dmax.max(m.get(i, i));
        for j in 0..n {
            if i != j {
                off = off.max(m.get(i, j).abs());
            }
        }
    }
    format!(
        "SPD solve failed for order-{n} matrix even at ridge {RIDGE_CAP:e} \
         (diagonal range [{dmin:.6e}, {dmax:.6e}], max off-diagonal {off:.6e})"
    )
}

fn relative_residual(m: &SpdMatrix, ridge: f64, x: &[f64], b: &[f64]) -> f64 {
    let n = m.order;
    let mut num = 0.0;
    for i in 0..n {
        let mut mx = ridge * x[i];
        for j in 0..n {
            mx += m.get(i, j) * x[j];
        }
        let r = mx - b[i];
        num += r * r;
    }
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

/// Solves `(M + ridge I) X = rhs` for every column of `rhs`.
///
/// The ridge starts at `ridge` (default [`DEFAULT_RIDGE`]) and escalates
/// tenfold whenever factoring fails or any column's relative residual exceeds
/// [`RESIDUAL_TOL`], capped at [`RIDGE_CAP`].
pub fn spd_solve(m: &SpdMatrix, rhs: &Mat, ridge: f64) -> Result<SpdSolve> {
    if rhs.n_rows() != m.order {
        return Err(Error::DimensionMismatch {
            expected: m.order,
            got: rhs.n_rows(),
        });
    }
    let mut r = ridge;
    loop {
        let factor = SpdFactor::new(m, r)?;
        r = factor.ridge_applied;
        let n = m.order;
        let k = rhs.n_cols();
        let mut solutions = Mat::zeros(n, k);
        let mut ok = true;
        let mut col = vec![0.0; n];
        let mut b = vec![0.0; n];
        for c in 0..k {
            for i in 0..n {
                b[i] = rhs.get(i, c);
            }
            col.copy_from_slice(&b);
            factor.solve(&mut col);
            if relative_residual(m, r, &col, &b) > RESIDUAL_TOL {
                ok = false;
                break;
            }
            for i in 0..n {
                solutions.set(i, c, col[i]);
            }
        }
        if ok {
            return Ok(SpdSolve {
                solutions,
                ridge_applied: r,
            });
        }
        r = next_ridge(r);
        if r > RIDGE_CAP * (1.0 + 1e-9) {
            return Err(Error::Numerical(condition_report(m)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd_from_rows(rows: &[&[f64]]) -> SpdMatrix {
        let n = rows.len();
        let mut m = Mat::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        SpdMatrix::from_mat(&m).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let m = spd_from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let mut rhs = Mat::zeros(3, 1);
        rhs.set(1, 0, 1.0);
        let out = spd_solve(&m, &rhs, DEFAULT_RIDGE).unwrap();
        assert!((out.solutions.get(0, 0)).abs() < 1e-9);
        assert!((out.solutions.get(1, 0) - 1.0).abs() < 1e-9);
        assert!((out.solutions.get(2, 0)).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_kernel_solve_known_value() {
        // [[1, k], [k, 1]] with k = exp(-1/2) and unit rhs solves to
        // (1/(1+k), 1/(1+k)); both entries equal 0.622459... .
        let k = (-0.5_f64).exp();
        let m = spd_from_rows(&[&[1.0, k], &[k, 1.0]]);
        let mut rhs = Mat::zeros(2, 1);
        rhs.set(0, 0, 1.0);
        rhs.set(1, 0, 1.0);
        let out = spd_solve(&m, &rhs, DEFAULT_RIDGE).unwrap();
        let expected = 1.0 / (1.0 + k);
        assert!((expected - 0.6224593312018546).abs() < 1e-15);
        assert!((out.solutions.get(0, 0) - expected).abs() < 1e-9);
        assert!((out.solutions.get(1, 0) - expected).abs() < 1e-9);
    }

    #[test]
    fn singular_all_ones_succeeds_via_ridge() {
        let m = spd_from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let mut rhs = Mat::zeros(2, 1);
        rhs.set(0, 0, 1.0);
        rhs.set(1, 0, 1.0);
        // Even a requested ridge of zero must escalate rather than fail.
        let out = spd_solve(&m, &rhs, 0.0).unwrap();
        assert!(out.ridge_applied > 0.0);
        assert!(out.ridge_applied <= RIDGE_CAP);
        assert!((out.solutions.get(0, 0) - 0.5).abs() < 1e-6);
        assert!((out.solutions.get(1, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 0.5);
        m.set(1, 0, 0.4999);
        m.set(1, 1, 1.0);
        assert!(SpdMatrix::from_mat(&m).is_err());
    }

    #[test]
    fn random_spd_solves_meet_residual_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = rng.random_range(2..8);
            // A^T A + I is symmetric positive definite.
            let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = if i == j { 1.0 } else { 0.0 };
                    for k in 0..n {
                        v += a[k * n + i] * a[k * n + j];
                    }
                    m.set(i, j, v);
                }
            }
            let spd = SpdMatrix::from_mat(&m).unwrap();
            let mut rhs = Mat::zeros(n, 2);
            for i in 0..n {
                rhs.set(i, 0, rng.random_range(-1.0..1.0));
                rhs.set(i, 1, rng.random_range(-1.0..1.0));
            }
            let out = spd_solve(&spd, &rhs, DEFAULT_RIDGE).unwrap();
            for c in 0..2 {
                let x: Vec<f64> = (0..n).map(|i| out.solutions.get(i, c)).collect();
                let b: Vec<f64> = (0..n).map(|i| rhs.get(i, c)).collect();
                let res = relative_residual(&spd, out.ridge_applied, &x, &b);
                assert!(res <= RESIDUAL_TOL, "trial {trial}: residual {res}");
            }
        }
    }
}
