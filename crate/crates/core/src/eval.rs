//! Classification metrics, lattice scoring, and the labeled cross-validation
//! reference used to benchmark the unsupervised bandwidth. Inliers are the
//! positive class throughout.

use serde::Serialize;

use crate::data::{linspace, DataMatrix, Rect};
use crate::datagen::{Label, LabeledSet};
use crate::error::{Error, Result};
use crate::kernel::Bandwidth;
use crate::svdd::{train_svdd, SvddModel, TrainConfig};

/// Two-by-two contingency table with inliers as positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

/// Tallies predictions (outlier flags) against ground truth.
pub fn confusion(labels: &[Label], outlier_flags: &[bool]) -> Result<ConfusionCounts> {
    if labels.len() != outlier_flags.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: outlier_flags.len(),
        });
    }
    let mut c = ConfusionCounts {
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
        true_negatives: 0,
    };
    for (label, &flagged) in labels.iter().zip(outlier_flags) {
        match (label, flagged) {
            (Label::Inlier, false) => c.true_positives += 1,
            (Label::Outlier, false) => c.false_positives += 1,
            (Label::Inlier, true) => c.false_negatives += 1,
            (Label::Outlier, true) => c.true_negatives += 1,
        }
    }
    Ok(c)
}

/// Precision, recall, and their harmonic mean; zero denominators yield zero.
#[derive(Debug, Clone, Copy)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

pub fn f1_score(counts: ConfusionCounts) -> F1Report {
    let tp = counts.true_positives as f64;
    let fp = counts.false_positives as f64;
    let fn_ = counts.false_negatives as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Report {
        precision,
        recall,
        f1,
        counts,
    }
}

/// Scores a labeled set and reports the classification quality.
pub fn evaluate_model(model: &SvddModel, set: &LabeledSet) -> Result<F1Report> {
    let scores = model.score_batch(&set.data)?;
    let flags: Vec<bool> = scores.iter().map(|s| s.is_outlier).collect();
    Ok(f1_score(confusion(&set.labels, &flags)?))
}

/// Model scores on an inclusive 2-D lattice, scanline by scanline
/// (outer loop over y, inner over x).
#[derive(Debug, Clone)]
pub struct GridScores {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major: index `iy * xs.len() + ix`.
    pub dist2: Vec<f64>,
    pub outlier: Vec<bool>,
}

impl GridScores {
    /// CSV with header `x,y,dist2,outlier`, one lattice point per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,dist2,outlier\n");
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                let k = iy * self.xs.len() + ix;
                out.push_str(&format!("{},{},{},{}\n", x, y, self.dist2[k], self.outlier[k]));
            }
        }
        out
    }
}

/// Scores every point of an inclusive `resolution x resolution` lattice over
/// the rectangle.
pub fn grid_scoring_2d(model: &SvddModel, rect: &Rect, resolution: usize) -> Result<GridScores> {
    if model.dim() != 2 {
        return Err(Error::Usage(format!(
            "lattice scoring requires a 2-dimensional model, got {}",
            model.dim()
        )));
    }
    if resolution < 2 {
        return Err(Error::Usage(format!(
            "lattice resolution must be at least 2, got {resolution}"
        )));
    }
    let xs = linspace(rect.x_min, rect.x_max, resolution);
    let ys = linspace(rect.y_min, rect.y_max, resolution);
    let mut rows = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            rows.push(vec![x, y]);
        }
    }
    let lattice = DataMatrix::from_rows(&rows)?;
    let scores = model.score_batch(&lattice)?;
    Ok(GridScores {
        xs,
        ys,
        dist2: scores.iter().map(|s| s.dist2).collect(),
        outlier: scores.iter().map(|s| s.is_outlier).collect(),
    })
}

/// Ground-truth membership over the same lattice ordering as
/// [`grid_scoring_2d`]; `true` means inside (inlier).
pub fn grid_truth(
    rect: &Rect,
    resolution: usize,
    mut inside: impl FnMut([f64; 2]) -> bool,
) -> Vec<bool> {
    let xs = linspace(rect.x_min, rect.x_max, resolution);
    let ys = linspace(rect.y_min, rect.y_max, resolution);
    let mut out = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            out.push(inside([x, y]));
        }
    }
    out
}

/// Classification quality of lattice scores against lattice truth.
pub fn grid_f1(scores: &GridScores, truth: &[bool]) -> Result<F1Report> {
    let labels: Vec<Label> = truth
        .iter()
        .map(|&t| if t { Label::Inlier } else { Label::Outlier })
        .collect();
    Ok(f1_score(confusion(&labels, &scores.outlier)?))
}

/// Outcome of the labeled bandwidth sweep.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub s_best: f64,
    pub f1_best: f64,
    /// Every evaluated (bandwidth, F1) pair, in ascending bandwidth order.
    pub table: Vec<(f64, f64)>,
    /// Grid points skipped because training did not converge.
    pub skipped: usize,
}

/// Supervised reference: trains at every grid bandwidth, scores the labeled
/// set, and returns the F1 argmax (ties break toward the smallest
/// bandwidth). Grid points whose training fails to converge are skipped.
pub fn best_bandwidth_cv(
    train: &DataMatrix,
    eval: &LabeledSet,
    s_grid: &[f64],
    cfg: &TrainConfig,
) -> Result<CvResult> {
    if s_grid.is_empty() {
        return Err(Error::Usage("empty bandwidth grid".into()));
    }
    let mut order: Vec<usize> = (0..s_grid.len()).collect();
    order.sort_by(|&a, &b| s_grid[a].partial_cmp(&s_grid[b]).expect("finite bandwidths"));
    let mut table = Vec::new();
    let mut skipped = 0;
    let mut best: Option<(f64, f64)> = None;
    for &idx in &order {
        let s = Bandwidth::new(s_grid[idx])?;
        let model = match train_svdd(train, s, cfg) {
            Ok(m) => m,
            Err(Error::NonConvergence { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let report = evaluate_model(&model, eval)?;
        table.push((s.get(), report.f1));
        // Strict improvement keeps the smallest bandwidth on ties.
        if best.map_or(true, |(_, f)| report.f1 > f) {
            best = Some((s.get(), report.f1));
        }
    }
    let (s_best, f1_best) = best.ok_or_else(|| {
        Error::Numerical("no bandwidth in the grid produced a convergent model".into())
    })?;
    Ok(CvResult {
        s_best,
        f1_best,
        table,
        skipped,
    })
}

/// Quality of the unsupervised pick relative to the supervised best;
/// `None` when the supervised best scored zero.
pub fn f1_ratio(f1_trace: f64, f1_best: f64) -> Option<f64> {
    if f1_best > 0.0 {
        Some(f1_trace / f1_best)
    } else {
        None
    }
}

/// Five-number summary with inclusive linear-interpolation quantiles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummaryStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::InsufficientData(
            "cannot summarize an empty sample".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let quantile = |frac: f64| -> f64 {
        let pos = (sorted.len() - 1) as f64 * frac;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            let w = pos - lo as f64;
            sorted[lo] * (1.0 - w) + sorted[hi] * w
        }
    };
    Ok(SummaryStats {
        min: sorted[0],
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// One study cell result; the supervised columns are present only when the
/// cross-validation reference ran.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub replicate: usize,
    pub dim: usize,
    pub shapes: usize,
    pub s_trace: f64,
    pub f1_trace: f64,
    pub s_best: Option<f64>,
    pub f1_best: Option<f64>,
    pub ratio: Option<f64>,
}

/// Renders study rows as CSV with header
/// `replicate,dim,shapes,s_trace,f1_trace,s_best,f1_best,ratio`;
/// absent supervised columns render as empty fields.
pub fn rows_to_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("replicate,dim,shapes,s_trace,f1_trace,s_best,f1_best,ratio\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.replicate,
            r.dim,
            r.shapes,
            r.s_trace,
            r.f1_trace,
            opt(r.s_best),
            opt(r.f1_best),
            opt(r.ratio),
        ));
    }
    out
}
