//! Spec-driven simulation studies: sweep shape families, dimensions, and
//! replicates; select the bandwidth unsupervised on each cell's training
//! data; and report classification quality, optionally against a supervised
//! cross-validation reference.
//!
//! Every cell derives its own seeds from the study seed and the cell
//! coordinates, so results are independent of execution order and identical
//! at any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Rect};
use crate::datagen::{
    derive_seed, labeled_eval_set, multi_shape, random_polygon, sample_polygon_interior,
    sample_shape_interior, Label, LabeledSet, PolygonSpec, ShapeKind, ShapeSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    best_bandwidth_cv, evaluate_model, f1_ratio, grid_scoring_2d, grid_truth, rows_to_csv,
    summary_stats, StudyRow, SummaryStats,
};
use crate::svdd::{train_svdd, TrainConfig};
use crate::trace::{log_grid, select_bandwidth_trace, BandwidthSearchConfig};

/// Shape family a study sweeps over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Sphere,
    Cube,
    MultiSphere,
    MultiCube,
    Polygon,
}

/// Supervised reference settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSpec {
    pub enabled: bool,
    pub grid_size: usize,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            grid_size: 30,
        }
    }
}

/// Full study description. All fields have defaults, so a JSON spec may set
/// only what it cares about.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySpec {
    pub kind: StudyKind,
    /// Ambient dimensions to sweep (fixed to 2 for polygons).
    pub dims: Vec<usize>,
    /// Shape counts for multi-shape kinds; vertex counts for polygons;
    /// ignored (one shape) otherwise.
    pub shape_counts: Vec<usize>,
    pub replicates: usize,
    /// Training points per shape.
    pub n_train: usize,
    /// Labeled evaluation points per shape (half inliers, half outliers).
    pub n_eval: usize,
    /// Training outlier-fraction bound.
    pub f: f64,
    /// Relative outlier-shell thickness.
    pub w: f64,
    /// Landmark count for the bandwidth selection.
    pub r: usize,
    pub cv: CvSpec,
    /// Lattice resolution for polygon ground truth.
    pub grid_resolution: usize,
    pub seed: u64,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            kind: StudyKind::Sphere,
            dims: vec![5],
            shape_counts: vec![1],
            replicates: 5,
            n_train: 1000,
            n_eval: 2000,
            f: 0.01,
            w: 0.1,
            r: 5,
            cv: CvSpec::default(),
            grid_resolution: 100,
            seed: 0,
        }
    }
}

impl StudySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: StudySpec = serde_json::from_str(text)
            .map_err(|e| Error::Usage(format!("unparseable study spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Usage("study needs at least one replicate".into()));
        }
        if self.dims.is_empty() && self.kind != StudyKind::Polygon {
            return Err(Error::Usage("study needs at least one dimension".into()));
        }
        if self.shape_counts.is_empty() {
            return Err(Error::Usage("study needs at least one shape count".into()));
        }
        if self.kind == StudyKind::Polygon && self.shape_counts.iter().any(|&k| k < 3) {
            return Err(Error::Usage("polygons need at least 3 vertices".into()));
        }
        if self.n_train <= self.r {
            return Err(Error::Usage(format!(
                "n_train ({}) must exceed the landmark count ({})",
                self.n_train, self.r
            )));
        }
        if self.kind != StudyKind::Polygon && (self.n_eval == 0 || self.n_eval % 2 != 0) {
            return Err(Error::Usage(format!(
                "n_eval must be even and positive, got {}",
                self.n_eval
            )));
        }
        if !(self.f > 0.0 && self.f <= 1.0) {
            return Err(Error::Usage(format!("f must lie in (0, 1], got {}", self.f)));
        }
        if !(self.w > 0.0) {
            return Err(Error::Usage(format!("w must be positive, got {}", self.w)));
        }
        if self.r == 0 {
            return Err(Error::Usage("landmark count must be positive".into()));
        }
        if self.cv.enabled && self.cv.grid_size < 2 {
            return Err(Error::Usage(format!(
                "cv grid size must be at least 2, got {}",
                self.cv.grid_size
            )));
        }
        if self.kind == StudyKind::Polygon && self.grid_resolution < 2 {
            return Err(Error::Usage(format!(
                "grid resolution must be at least 2, got {}",
                self.grid_resolution
            )));
        }
        Ok(())
    }
}

/// Completed study: per-cell rows plus per-group five-number summaries.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<GroupSummary>,
}

/// Summary over the replicates of one (dim, shapes) group.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub dim: usize,
    pub shapes: usize,
    pub f1_trace: SummaryStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<SummaryStats>,
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summaries).expect("summaries serialize")
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    dim: usize,
    shapes: usize,
    replicate: usize,
}

fn cell_seed(spec: &StudySpec, cell: Cell, stream: u64) -> u64 {
    let coords = ((cell.dim as u64) << 32) | cell.shapes as u64;
    derive_seed(
        spec.seed,
        coords.wrapping_add(stream.wrapping_mul(0x5851_F42D_4C95_7F2D)),
        cell.replicate as u64,
    )
}

/// Training data plus the evaluation protocol for one cell.
enum CellEval {
    Labeled(LabeledSet),
    Lattice { rect: Rect, truth: Vec<bool> },
}

fn build_cell(spec: &StudySpec, cell: Cell) -> Result<(DataMatrix, CellEval)> {
    match spec.kind {
        StudyKind::Sphere | StudyKind::Cube => {
            let kind = if spec.kind == StudyKind::Sphere {
                ShapeKind::Sphere
            } else {
                ShapeKind::Cube
            };
            let shape = ShapeSpec::origin(kind, cell.dim, 1.0, spec.w);
            let train = sample_shape_interior(&shape, spec.n_train, cell_seed(spec, cell, 1))?;
            let eval = labeled_eval_set(
                std::slice::from_ref(&shape),
                spec.n_eval,
                cell_seed(spec, cell, 2),
            )?;
            Ok((train, CellEval::Labeled(eval)))
        }
        StudyKind::MultiSphere | StudyKind::MultiCube => {
            let kind = if spec.kind == StudyKind::MultiSphere {
                ShapeKind::Sphere
            } else {
                ShapeKind::Cube
            };
            let scene = multi_shape(
                kind,
                cell.shapes,
                cell.dim,
                spec.n_train,
                spec.n_eval,
                spec.w,
                cell_seed(spec, cell, 3),
            )?;
            Ok((scene.train, CellEval::Labeled(scene.eval)))
        }
        StudyKind::Polygon => {
            let poly = random_polygon(&PolygonSpec::new(
                cell.shapes,
                cell_seed(spec, cell, 4),
            ))?;
            let train = sample_polygon_interior(&poly, spec.n_train, cell_seed(spec, cell, 5))?;
            let (x_min, x_max, y_min, y_max) = poly.bounds();
            let rect = Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            };
            let truth = grid_truth(&rect, spec.grid_resolution, |p| poly.contains(p));
            Ok((train, CellEval::Lattice { rect, truth }))
        }
    }
}

fn run_cell(spec: &StudySpec, cell: Cell) -> Result<StudyRow> {
    let (train, eval) = build_cell(spec, cell)?;
    let search = BandwidthSearchConfig {
        landmark_count: spec.r,
        seed: cell_seed(spec, cell, 6),
        ..Default::default()
    };
    let selection = select_bandwidth_trace(&train, &search)?;
    let s_trace = selection.bandwidth;
    let train_cfg = TrainConfig {
        f: spec.f,
        seed: cell_seed(spec, cell, 7),
        ..Default::default()
    };
    let model = train_svdd(&train, s_trace, &train_cfg)?;

    // The labeled set the supervised reference sweeps over: for polygons the
    // lattice itself is the evaluation set.
    let (f1_trace, eval_set) = match &eval {
        CellEval::Labeled(set) => (evaluate_model(&model, set)?.f1, set.clone()),
        CellEval::Lattice { rect, truth } => {
            let grid = grid_scoring_2d(&model, rect, spec.grid_resolution)?;
            let f1 = crate::eval::grid_f1(&grid, truth)?.f1;
            let mut rows = Vec::with_capacity(truth.len());
            for &y in &grid.ys {
                for &x in &grid.xs {
                    rows.push(vec![x, y]);
                }
            }
            let labels: Vec<Label> = truth
                .iter()
                .map(|&t| if t { Label::Inlier } else { Label::Outlier })
                .collect();
            (
                f1,
                LabeledSet {
                    data: DataMatrix::from_rows(&rows)?,
                    labels,
                },
            )
        }
    };

    let (s_best, f1_best, ratio) = if spec.cv.enabled {
        // Sweep the bracket the unsupervised search examined, and include
        // its pick so the ratio can never exceed one.
        let lo = selection.profile.points.first().map(|p| p.s).unwrap_or(s_trace.get());
        let hi = selection.profile.points.last().map(|p| p.s).unwrap_or(s_trace.get());
        let mut grid = log_grid(lo, hi, spec.cv.grid_size);
        grid.push(s_trace.get());
        let cv = best_bandwidth_cv(&train, &eval_set, &grid, &train_cfg)?;
        (
            Some(cv.s_best),
            Some(cv.f1_best),
            f1_ratio(f1_trace, cv.f1_best),
        )
    } else {
        (None, None, None)
    };

    Ok(StudyRow {
        replicate: cell.replicate,
        dim: cell.dim,
        shapes: cell.shapes,
        s_trace: s_trace.get(),
        f1_trace,
        s_best,
        f1_best,
        ratio,
    })
}

/// Runs every cell of the study. Cells execute in parallel; rows come back
/// in deterministic (dim, shapes, replicate) order regardless of scheduling.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let dims: Vec<usize> = if spec.kind == StudyKind::Polygon {
        vec![2]
    } else {
        spec.dims.clone()
    };
    let shape_counts: Vec<usize> = match spec.kind {
        StudyKind::Sphere | StudyKind::Cube => vec![1],
        _ => spec.shape_counts.clone(),
    };
    let mut cells = Vec::new();
    for &dim in &dims {
        for &shapes in &shape_counts {
            for replicate in 0..spec.replicates {
                cells.push(Cell {
                    dim,
                    shapes,
                    replicate,
                });
            }
        }
    }
    let rows: Result<Vec<StudyRow>> = cells
        .par_iter()
        .map(|&cell| run_cell(spec, cell))
        .collect();
    let rows = rows?;

    let mut summaries = Vec::new();
    for &dim in &dims {
        for &shapes in &shape_counts {
            let group: Vec<&StudyRow> = rows
                .iter()
                .filter(|r| r.dim == dim && r.shapes == shapes)
                .collect();
            if group.is_empty() {
                continue;
            }
            let f1s: Vec<f64> = group.iter().map(|r| r.f1_trace).collect();
            let ratios: Vec<f64> = group.iter().filter_map(|r| r.ratio).collect();
            summaries.push(GroupSummary {
                dim,
                shapes,
                f1_trace: summary_stats(&f1s)?,
                ratio: if ratios.is_empty() {
                    None
                } else {
                    Some(summary_stats(&ratios)?)
                },
            });
        }
    }
    Ok(StudyReport { rows, summaries })
}
