//! Support vector data description: training, scoring, persistence.
//!
//! Training solves the dual problem
//!
//! ```text
//! maximize  sum_i a_i K(x_i, x_i) - sum_ij a_i a_j K(x_i, x_j)
//! subject to  sum_i a_i = 1,   0 <= a_i <= C,   C = 1 / (N f)
//! ```
//!
//! with a pairwise coordinate ascent: each step picks the maximally violating
//! pair under the equality constraint, solves the one-dimensional subproblem
//! exactly, and clips to the box. `f` upper-bounds the training fraction that
//! may fall outside the sphere. Points split by their multiplier: `a = 0`
//! inside, `0 < a < C` on the boundary, `a = C` outside. The squared radius
//! is the boundary points' squared distance to the center in feature space,
//! and a point `z` is an outlier when its squared distance exceeds it.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Standardizer};
use crate::error::{Error, Result};
use crate::kernel::{dist2_expanded, kernel_from_dist2, norm2, Bandwidth};

/// Largest training set for which the full kernel matrix is materialized.
const FULL_CACHE_LIMIT: usize = 4096;
/// Approximate float budget for the row cache above that limit.
const ROW_CACHE_FLOATS: usize = 4096 * 4096;

/// Training configuration.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Upper bound on the fraction of training points left outside, in (0, 1].
    pub f: f64,
    /// Optimality tolerance: training stops when the worst constraint
    /// violation drops below this.
    pub kkt_tol: f64,
    /// Pair-update budget; `None` means `1000 * N`.
    pub max_passes: Option<usize>,
    /// Recorded in the model metadata (the solver itself is deterministic).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            f: 0.01,
            kkt_tol: 1e-6,
            max_passes: None,
            seed: 0,
        }
    }
}

/// Position of a training point relative to the fitted sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionLabel {
    Inside,
    Boundary,
    Outside,
}

/// Score of a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// Squared feature-space distance to the sphere center.
    pub dist2: f64,
    /// True when `dist2` strictly exceeds the squared radius.
    pub is_outlier: bool,
}

/// Squared-radius estimate with its per-point diagnostics.
#[derive(Debug, Clone)]
pub struct RadiusEstimate {
    /// Mean squared distance over the uncapped support vectors.
    pub mean: f64,
    /// Max minus min of the per-point values.
    pub spread: f64,
    /// Squared distance of each uncapped support vector.
    pub per_point: Vec<f64>,
    /// True when no uncapped support vector existed and the radius fell back
    /// to the largest squared distance among capped points.
    pub fallback: bool,
}

/// Kernel entries for training: full matrix for small `N`, a bounded
/// recently-used row cache above [`FULL_CACHE_LIMIT`].
struct KernelCache<'a> {
    data: &'a DataMatrix,
    s: f64,
    norms: Vec<f64>,
    full: Option<Vec<f64>>,
    rows: HashMap<usize, Box<[f64]>>,
    order: VecDeque<usize>,
    row_budget: usize,
}

impl<'a> KernelCache<'a> {
    fn new(data: &'a DataMatrix, s: f64) -> Self {
        let n = data.n_rows();
        let norms: Vec<f64> = data.rows().map(norm2).collect();
        let full = if n <= FULL_CACHE_LIMIT {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in 0..i {
                    let d2 = dist2_expanded(data.row(i), norms[i], data.row(j), norms[j]);
                    let v = kernel_from_dist2(d2, s);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Some(k)
        } else {
            None
        };
        let row_budget = (ROW_CACHE_FLOATS / n.max(1)).max(8);
        Self {
            data,
            s,
            norms,
            full,
            rows: HashMap::new(),
            order: VecDeque::new(),
            row_budget,
        }
    }

    fn compute_row(&self, i: usize) -> Box<[f64]> {
        let n = self.data.n_rows();
        let xi = self.data.row(i);
        let ni = self.norms[i];
        (0..n)
            .map(|j| {
                if i == j {
                    1.0
                } else {
                    let d2 = dist2_expanded(xi, ni, self.data.row(j), self.norms[j]);
                    kernel_from_dist2(d2, self.s)
                }
            })
            .collect()
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if let Some(full) = &self.full {
            let n = self.data.n_rows();
            return &full[i * n..(i + 1) * n];
        }
        if !self.rows.contains_key(&i) {
            if self.order.len() >= self.row_budget {
                if let Some(old) = self.order.pop_front() {
                    self.rows.remove(&old);
                }
            }
            let row = self.compute_row(i);
            self.rows.insert(i, row);
            self.order.push_back(i);
        }
        self.rows.get(&i).expect("row just ensured")
    }

    fn copy_row(&mut self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }
}

struct SmoSolution {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
}

/// Pairwise coordinate ascent on the dual, tracking `grad_i = 1 - 2 (K a)_i`.
fn smo(
    cache: &mut KernelCache,
    c: f64,
    kkt_tol: f64,
    max_iter: usize,
    mut on_objective: Option<&mut dyn FnMut(f64)>,
) -> Result<SmoSolution> {
    let n = cache.data.n_rows();
    let mut alpha = vec![1.0 / n as f64; n];
    let mut grad = vec![0.0; n];
    let mut row_i = vec![0.0; n];
    let mut row_j = vec![0.0; n];
    for i in 0..n {
        cache.copy_row(i, &mut row_i);
        let ka: f64 = row_i.iter().zip(&alpha).map(|(k, a)| k * a).sum();
        grad[i] = 1.0 - 2.0 * ka;
    }
    let mut iterations = 0;
    loop {
        if let Some(cb) = on_objective.as_deref_mut() {
            let w: f64 = alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a * (1.0 - g) / 2.0)
                .sum();
            cb(1.0 - w);
        }
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for k in 0..n {
            if alpha[k] < c && up.map_or(true, |u| grad[k] > grad[u]) {
                up = Some(k);
            }
            if alpha[k] > 0.0 && down.map_or(true, |d| grad[k] < grad[d]) {
                down = Some(k);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            break;
        };
        let violation = grad[i] - grad[j];
        if violation < kkt_tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                violation,
                iterations,
            });
        }
        cache.copy_row(i, &mut row_i);
        cache.copy_row(j, &mut row_j);
        // Curvature along e_i - e_j; zero only for coincident points.
        let eta = 2.0 - 2.0 * row_i[j];
        let t_cap = c - alpha[i];
        let t_avail = alpha[j];
        let t_star = if eta > 1e-12 {
            violation / (2.0 * eta)
        } else {
            f64::INFINITY
        };
        let t = t_star.min(t_cap).min(t_avail);
        alpha[i] = if t == t_cap { c } else { alpha[i] + t };
        alpha[j] = if t == t_avail { 0.0 } else { alpha[j] - t };
        for k in 0..n {
            grad[k] -= 2.0 * t * (row_i[k] - row_j[k]);
        }
        iterations += 1;
    }
    Ok(SmoSolution {
        alpha,
        grad,
        iterations,
    })
}

/// A trained data description.
#[derive(Debug, Clone)]
pub struct SvddModel {
    s: f64,
    f: f64,
    c: f64,
    /// Multipliers for every training row; present only on freshly trained
    /// models (persistence keeps support vectors alone).
    alpha_full: Option<Vec<f64>>,
    sv_alpha: Vec<f64>,
    sv_points: DataMatrix,
    sv_norms: Vec<f64>,
    offset_w: f64,
    r_squared: f64,
    r_squared_spread: f64,
    radius_fallback: bool,
    kkt_tol: f64,
    n: usize,
    p: usize,
    seed: u64,
    created: String,
    standardizer: Option<Standardizer>,
}

fn creation_stamp() -> String {
    // Honor the reproducible-build convention: a fixed epoch pins the stamp.
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_else(|| chrono::DateTime::from_timestamp(0, 0).expect("epoch"))
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

/// Trains a data description at the given bandwidth.
pub fn train_svdd(data: &DataMatrix, s: Bandwidth, cfg: &TrainConfig) -> Result<SvddModel> {
    if !(cfg.f > 0.0 && cfg.f <= 1.0) {
        return Err(Error::Usage(format!(
            "outlier fraction must lie in (0, 1], got {}",
            cfg.f
        )));
    }
    if !(cfg.kkt_tol > 0.0) {
        return Err(Error::Usage("optimality tolerance must be positive".into()));
    }
    let n = data.n_rows();
    let c = 1.0 / (n as f64 * cfg.f);
    let max_iter = cfg.max_passes.unwrap_or(1000 * n);
    let mut cache = KernelCache::new(data, s.get());
    let sol = smo(&mut cache, c, cfg.kkt_tol, max_iter, None)?;

    let offset_w: f64 = sol
        .alpha
        .iter()
        .zip(&sol.grad)
        .map(|(a, g)| a * (1.0 - g) / 2.0)
        .sum();

    let sv_indices: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
    let sv_alpha: Vec<f64> = sv_indices.iter().map(|&i| sol.alpha[i]).collect();
    let sv_points = data.select(&sv_indices);
    let sv_norms: Vec<f64> = sv_points.rows().map(norm2).collect();

    // Squared radius from the uncapped support vectors; if every support
    // vector is capped, fall back to the farthest capped point.
    let uncapped: Vec<f64> = sv_indices
        .iter()
        .filter(|&&i| sol.alpha[i] < c)
        .map(|&i| sol.grad[i] + offset_w)
        .collect();
    let (r_squared, spread, fallback) = if uncapped.is_empty() {
        let worst = sv_indices
            .iter()
            .map(|&i| sol.grad[i] + offset_w)
            .fold(f64::NEG_INFINITY, f64::max);
        (worst, 0.0, true)
    } else {
        let mean = uncapped.iter().sum::<f64>() / uncapped.len() as f64;
        let lo = uncapped.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = uncapped.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        (mean, hi - lo, false)
    };

    Ok(SvddModel {
        s: s.get(),
        f: cfg.f,
        c,
        alpha_full: Some(sol.alpha),
        sv_alpha,
        sv_points,
        sv_norms,
        offset_w,
        r_squared: r_squared.max(0.0),
        r_squared_spread: spread,
        radius_fallback: fallback,
        kkt_tol: cfg.kkt_tol,
        n,
        p: data.dim(),
        seed: cfg.seed,
        created: creation_stamp(),
        standardizer: None,
    })
}

impl SvddModel {
    pub fn bandwidth(&self) -> f64 {
        self.s
    }

    pub fn fraction(&self) -> f64 {
        self.f
    }

    /// Box cap `C = 1 / (N f)`.
    pub fn cap(&self) -> f64 {
        self.c
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    /// Spread (max minus min) of the per-point radius estimates.
    pub fn r_squared_spread(&self) -> f64 {
        self.r_squared_spread
    }

    pub fn offset_w(&self) -> f64 {
        self.offset_w
    }

    pub fn support_count(&self) -> usize {
        self.sv_alpha.len()
    }

    /// Multipliers for every training row, in training order. `None` on
    /// reloaded models: persistence keeps the support vectors alone.
    pub fn alpha(&self) -> Option<&[f64]> {
        self.alpha_full.as_deref()
    }

    pub fn n_training(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    /// Attaches the feature transform that was applied to the training data,
    /// so scoring can apply it to incoming points.
    pub fn with_standardizer(mut self, st: Standardizer) -> Self {
        self.standardizer = Some(st);
        self
    }

    /// Squared distance in feature space, in the model's own coordinate
    /// system (after any standardization).
    fn dist2_internal(&self, z: &[f64]) -> f64 {
        let zn = norm2(z);
        let s = self.s;
        let mut k_sum = 0.0;
        for (i, row) in self.sv_points.rows().enumerate() {
            let d2 = dist2_expanded(row, self.sv_norms[i], z, zn);
            k_sum += self.sv_alpha[i] * kernel_from_dist2(d2, s);
        }
        1.0 - 2.0 * k_sum + self.offset_w
    }

    /// Scores one point: squared distance to the center and the outlier flag
    /// (`dist2 > r_squared`, strictly; ties count as inliers).
    pub fn score(&self, z: &[f64]) -> Result<Score> {
        if z.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("point has non-finite coordinates".into()));
        }
        let dist2 = match &self.standardizer {
            Some(st) => self.dist2_internal(&st.transform_point(z)?),
            None => self.dist2_internal(z),
        };
        Ok(Score {
            dist2,
            is_outlier: dist2 > self.r_squared,
        })
    }

    /// Scores every row, preserving order. Bitwise identical to calling
    /// [`SvddModel::score`] row by row, at any worker count.
    pub fn score_batch(&self, data: &DataMatrix) -> Result<Vec<Score>> {
        if data.dim() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: data.dim(),
            });
        }
        if data.n_rows() >= 512 {
            (0..data.n_rows())
                .into_par_iter()
                .map(|i| self.score(data.row(i)))
                .collect()
        } else {
            data.rows().map(|row| self.score(row)).collect()
        }
    }

    /// Splits the training points by their multipliers: below tolerance is
    /// inside, within tolerance of the cap is outside, the rest boundary.
    /// Only available on freshly trained models; persistence keeps support
    /// vectors alone, so reloaded models cannot reconstruct the split.
    pub fn classify_training_points(&self) -> Result<Vec<PositionLabel>> {
        let alpha = self.alpha_full.as_ref().ok_or_else(|| {
            Error::Usage("training multipliers are not retained in a reloaded model".into())
        })?;
        Ok(alpha
            .iter()
            .map(|&a| {
                if a < self.kkt_tol {
                    PositionLabel::Inside
                } else if a > self.c - self.kkt_tol {
                    PositionLabel::Outside
                } else {
                    PositionLabel::Boundary
                }
            })
            .collect())
    }

    /// Recomputes the per-point radius diagnostics from the stored support
    /// vectors.
    pub fn radius_estimate(&self) -> RadiusEstimate {
        let uncapped: Vec<f64> = self
            .sv_alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a < self.c)
            .map(|(i, _)| self.dist2_internal(self.sv_points.row(i)))
            .collect();
        if uncapped.is_empty() {
            let worst = (0..self.sv_points.n_rows())
                .map(|i| self.dist2_internal(self.sv_points.row(i)))
                .fold(f64::NEG_INFINITY, f64::max);
            RadiusEstimate {
                mean: worst,
                spread: 0.0,
                per_point: Vec::new(),
                fallback: true,
            }
        } else {
            let mean = uncapped.iter().sum::<f64>() / uncapped.len() as f64;
            let lo = uncapped.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let hi = uncapped.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            RadiusEstimate {
                mean,
                spread: hi - lo,
                per_point: uncapped,
                fallback: false,
            }
        }
    }

    /// Serializes the model to versioned JSON.
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            p: self.p,
            s: self.s,
            f: self.f,
            c: self.c,
            alpha: self.sv_alpha.clone(),
            support_vectors: self.sv_points.rows().map(|r| r.to_vec()).collect(),
            r_squared: self.r_squared,
            offset_w: self.offset_w,
            metadata: ModelMetadata {
                n: self.n,
                seed: self.seed,
                created: self.created.clone(),
            },
            standardize: self.standardizer.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    /// Restores a model from JSON, rejecting unknown format versions and
    /// malformed geometry.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)
            .map_err(|e| Error::ModelFormat(format!("unparseable model JSON: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if doc.alpha.len() != doc.support_vectors.len() {
            return Err(Error::ModelFormat(format!(
                "{} multipliers for {} support vectors",
                doc.alpha.len(),
                doc.support_vectors.len()
            )));
        }
        if !(doc.s > 0.0 && doc.s.is_finite()) {
            return Err(Error::ModelFormat(format!("invalid bandwidth {}", doc.s)));
        }
        let sv_points = DataMatrix::from_rows(&doc.support_vectors)
            .map_err(|e| Error::ModelFormat(format!("bad support vectors: {e}")))?;
        if sv_points.dim() != doc.p {
            return Err(Error::ModelFormat(format!(
                "support vectors have {} columns, header says {}",
                sv_points.dim(),
                doc.p
            )));
        }
        if let Some(st) = &doc.standardize {
            if st.mean.len() != doc.p || st.std.len() != doc.p {
                return Err(Error::ModelFormat(
                    "standardization vectors do not match the dimension".into(),
                ));
            }
        }
        let sv_norms = sv_points.rows().map(norm2).collect();
        Ok(Self {
            s: doc.s,
            f: doc.f,
            c: doc.c,
            alpha_full: None,
            sv_alpha: doc.alpha,
            sv_points,
            sv_norms,
            offset_w: doc.offset_w,
            r_squared: doc.r_squared,
            r_squared_spread: 0.0,
            radius_fallback: false,
            kkt_tol: TrainConfig::default().kkt_tol,
            n: doc.metadata.n,
            p: doc.p,
            seed: doc.metadata.seed,
            created: doc.metadata.created,
            standardizer: doc.standardize,
        })
    }

    /// True when the radius came from the all-capped fallback.
    pub fn radius_fallback(&self) -> bool {
        self.radius_fallback
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    p: usize,
    s: f64,
    f: f64,
    #[serde(rename = "C")]
    c: f64,
    alpha: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    r_squared: f64,
    offset_w: f64,
    metadata: ModelMetadata,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    standardize: Option<Standardizer>,
}

#[derive(Serialize, Deserialize)]
struct ModelMetadata {
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    created: String,
}

/// Training entry point that also reports the iteration count and objective
/// trajectory; used by diagnostics and tests.
pub fn train_svdd_traced(
    data: &DataMatrix,
    s: Bandwidth,
    cfg: &TrainConfig,
) -> Result<(SvddModel, usize, Vec<f64>)> {
    let n = data.n_rows();
    let c = 1.0 / (n as f64 * cfg.f);
    let max_iter = cfg.max_passes.unwrap_or(1000 * n);
    let mut trajectory = Vec::new();
    let mut cache = KernelCache::new(data, s.get());
    let sol = smo(
        &mut cache,
        c,
        cfg.kkt_tol,
        max_iter,
        Some(&mut |obj| trajectory.push(obj)),
    )?;
    let iterations = sol.iterations;
    drop(sol);
    let model = train_svdd(data, s, cfg)?;
    Ok((model, iterations, trajectory))
}
