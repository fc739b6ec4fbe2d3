//! Shared fixtures and reference solvers for the integration suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svdd_core::datagen::{
    gaussian_blobs, sample_shape_interior, two_donuts_circle, ShapeKind, ShapeSpec,
};
use svdd_core::DataMatrix;

/// Five seeded datasets spanning the geometries the bandwidth criterion is
/// exercised on: two clustered-blob scenes, the fixed two-rings-plus-disc
/// scene, and two solid five-dimensional balls.
pub fn fixtures() -> Vec<(&'static str, DataMatrix)> {
    let blobs_2d = gaussian_blobs(
        &[vec![-4.0, 0.0], vec![3.0, 3.0], vec![2.0, -3.5]],
        150,
        0.7,
        101,
    )
    .expect("blob fixture");
    let blobs_3d = gaussian_blobs(
        &[
            vec![0.0, 0.0, 0.0],
            vec![5.0, 5.0, 5.0],
            vec![-5.0, 4.0, -2.0],
            vec![4.0, -5.0, 1.0],
        ],
        100,
        0.9,
        202,
    )
    .expect("blob fixture");
    let rings_disc = two_donuts_circle(303);
    let ball = ShapeSpec::origin(ShapeKind::Sphere, 5, 1.0, 0.1);
    let ball_5d_a = sample_shape_interior(&ball, 700, 404).expect("ball fixture");
    let ball_5d_b = sample_shape_interior(&ball, 900, 505).expect("ball fixture");
    vec![
        ("blobs-2d", blobs_2d),
        ("blobs-3d", blobs_3d),
        ("rings-disc", rings_disc),
        ("ball-5d-a", ball_5d_a),
        ("ball-5d-b", ball_5d_b),
    ]
}

/// Inclusive log-spaced grid from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && lo < hi);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}

/// Per-dimension bounding box of the data.
pub fn bounding_box(data: &DataMatrix) -> (Vec<f64>, Vec<f64>) {
    let p = data.dim();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for row in data.rows() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}

/// Uniform points over the data's bounding box, inflated on every side by
/// `inflate` times the box extent in that dimension.
pub fn box_noise(data: &DataMatrix, n: usize, inflate: f64, seed: u64) -> DataMatrix {
    let (lo, hi) = bounding_box(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            lo.iter()
                .zip(&hi)
                .map(|(&a, &b)| {
                    let pad = inflate * (b - a).max(1e-9);
                    rng.random_range((a - pad)..(b + pad))
                })
                .collect()
        })
        .collect();
    DataMatrix::from_rows(&rows).expect("noise rows are well-formed")
}

/// Random planar configurations whose points keep a minimum separation, so
/// the dual problem stays well conditioned and its solution is tightly
/// determined for solver-equivalence checks.
pub fn separated_points_2d(n: usize, half_extent: f64, min_sep: f64, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut guard = 0;
    while pts.len() < n {
        guard += 1;
        assert!(guard < 100_000, "separation constraint is infeasible");
        let cand = vec![
            rng.random_range(-half_extent..half_extent),
            rng.random_range(-half_extent..half_extent),
        ];
        let ok = pts.iter().all(|p| {
            let dx = p[0] - cand[0];
            let dy = p[1] - cand[1];
            (dx * dx + dy * dy).sqrt() >= min_sep
        });
        if ok {
            pts.push(cand);
        }
    }
    DataMatrix::from_rows(&pts).expect("separated points are well-formed")
}

/// Dense Gaussian kernel matrix (row-major, `n x n`).
pub fn kernel_matrix(data: &DataMatrix, s: f64) -> Vec<f64> {
    let n = data.n_rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = data
                .row(i)
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k[i * n + j] = (-d2 / (2.0 * s * s)).exp();
        }
    }
    k
}

/// Dual objective `sum_i a_i K_ii - a' K a` (the diagonal is 1 for the
/// Gaussian kernel, so this is `1 - a' K a` on the simplex).
pub fn dual_objective(k: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += k[i * n + j] * alpha[j];
        }
        quad += alpha[i] * row;
    }
    let diag: f64 = (0..n).map(|i| alpha[i] * k[i * n + i]).sum();
    diag - quad
}

/// Euclidean projection of `v` onto `{ 0 <= a_i <= cap, sum a = 1 }`:
/// bisects on the shift `t` so that `sum clip(v_i - t, 0, cap) = 1`.
pub fn project_box_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let sum_at = |t: f64| -> f64 { v.iter().map(|&x| (x - t).clamp(0.0, cap)).sum() };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(sum_at(lo) >= 1.0 && sum_at(hi) <= 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - t).clamp(0.0, cap)).collect()
}

/// Brute-force reference for the box-constrained dual: projected gradient
/// ascent from the uniform feasible point with a conservative fixed step.
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

pub fn svdd_dual_oracle(data: &DataMatrix, s: f64, f: f64, steps: usize) -> OracleSolution {
    let n = data.n_rows();
    let cap = 1.0 / (n as f64 * f);
    let k = kernel_matrix(data, s);
    let mut alpha = vec![1.0 / n as f64; n];
    // The gradient of the objective is 1 - 2 K a; a step of 1/(2n) respects
    // the curvature bound lambda_max(K) <= trace(K) = n.
    let step = 1.0 / (2.0 * n as f64);
    let mut v = vec![0.0; n];
    for _ in 0..steps {
        for i in 0..n {
            let mut ka = 0.0;
            for j in 0..n {
                ka += k[i * n + j] * alpha[j];
            }
            v[i] = alpha[i] + step * (1.0 - 2.0 * ka);
        }
        alpha = project_box_simplex(&v, cap);
    }
    let objective = dual_objective(&k, &alpha);
    OracleSolution { alpha, objective }
}
