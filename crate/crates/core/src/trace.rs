//! Unsupervised Gaussian bandwidth selection via low-rank projection quality.
//!
//! For landmarks `z_1..z_r` and bandwidth `s`, each point's feature-space
//! image is projected onto the span of the landmark images. The squared
//! projection norm
//!
//! ```text
//! psi(x, s) = W_x(s)^T U(s)^{-1} W_x(s),   U_ij = K_s(z_i, z_j),  W_x,k = K_s(x, z_k)
//! ```
//!
//! lies in `[0, 1]` and measures how well the landmarks explain `x`. The mean
//! `g(s)` over the data rises from 0 (bandwidth too small: nothing projects)
//! to 1 (too large: everything collapses together). Its derivative `h = g'`
//! has a closed form through the kernel derivatives
//!
//! ```text
//! U'_ij = ||z_i - z_j||^2 K_s(z_i, z_j) / s^3
//! W'_k  = ||x - z_k||^2  K_s(x, z_k)  / s^3
//! h(s)  = (2/N) sum_i B_i^T W_i' - (1/N) sum_i B_i^T U' B_i,   B_i = U^{-1} W_i
//! ```
//!
//! and the selected bandwidth is the maximizer of `h`: the point of fastest
//! gain in projection quality, where kernel geometry is most expressive.
//! Cached squared distances make each evaluation `O(N r^2)`.

use rayon::prelude::*;

use crate::data::{DataMatrix, Mat};
use crate::error::{Error, Result};
use crate::kernel::{kernel_from_dist2, squared_distances, Bandwidth};
use crate::landmarks::{select_landmarks, LandmarkSet, DEFAULT_LANDMARK_COUNT};
use crate::spd::{spd_solve, SpdFactor, SpdMatrix, DEFAULT_RIDGE, RIDGE_CAP};

/// Block length for deterministic (worker-count independent) reductions.
const SUM_BLOCK: usize = 256;
/// Minimum rows before per-point work fans out to the thread pool.
const PAR_THRESHOLD: usize = 1024;

/// Compensated (Neumaier) sum of a slice, sequential.
fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Deterministic blocked sum: fixed-size block partials combined in index
/// order, so the result is identical at any worker count.
fn blocked_sum(values: &[f64]) -> f64 {
    let partials: Vec<f64> = values.chunks(SUM_BLOCK).map(neumaier_sum).collect();
    neumaier_sum(&partials)
}

/// Cached squared distances between data, landmarks, and landmark pairs.
///
/// Building the context is the only `O(N r p)` step; every bandwidth
/// evaluation afterwards costs `O(N r^2)`.
#[derive(Debug, Clone)]
pub struct TraceContext {
    /// `N x r` squared distances from data rows to landmarks.
    d2_xz: Mat,
    /// `r x r` squared distances between landmarks.
    d2_zz: Mat,
    n: usize,
    r: usize,
}

impl TraceContext {
    pub fn new(data: &DataMatrix, landmarks: &LandmarkSet) -> Result<Self> {
        let d2_xz = squared_distances(data, landmarks.points())?;
        let d2_zz = squared_distances(landmarks.points(), landmarks.points())?;
        Ok(Self {
            d2_xz,
            d2_zz,
            n: data.n_rows(),
            r: landmarks.count(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn landmark_count(&self) -> usize {
        self.r
    }
}

/// Landmark kernel matrix `U(s)`; diagonal is exactly 1.
fn build_u(ctx: &TraceContext, s: f64) -> Mat {
    let r = ctx.r;
    let mut u = Mat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            u.set(i, j, kernel_from_dist2(ctx.d2_zz.get(i, j), s));
        }
    }
    u
}

/// Entry-wise bandwidth derivative of `U(s)`.
fn build_u_prime(ctx: &TraceContext, u: &Mat, s: f64) -> Mat {
    let r = ctx.r;
    let inv_s3 = 1.0 / (s * s * s);
    let mut up = Mat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            up.set(i, j, ctx.d2_zz.get(i, j) * u.get(i, j) * inv_s3);
        }
    }
    up
}

/// Per-point evaluation products.
struct PointEval {
    psi: f64,
    /// `B_i . W_i'`
    t1: f64,
    /// `B_i^T U' B_i`
    t2: f64,
    rows: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>, // (w, w', b)
}

struct EvalCore {
    u: Mat,
    u_prime: Option<Mat>,
    ridge_applied: f64,
    points: Vec<PointEval>,
}

fn eval_core(
    ctx: &TraceContext,
    s: f64,
    ridge: f64,
    derivatives: bool,
    keep_rows: bool,
) -> Result<EvalCore> {
    let u = build_u(ctx, s);
    let u_spd = SpdMatrix::from_mat(&u)?;
    let factor = SpdFactor::new(&u_spd, ridge)?;
    let u_prime = derivatives.then(|| build_u_prime(ctx, &u, s));
    let r = ctx.r;
    let inv_s3 = 1.0 / (s * s * s);

    let eval_point = |i: usize| -> PointEval {
        let d2 = ctx.d2_xz.row(i);
        let w: Vec<f64> = d2.iter().map(|&d| kernel_from_dist2(d, s)).collect();
        let mut y = w.clone();
        factor.solve_lower(&mut y);
        let psi: f64 = y.iter().map(|v| v * v).sum();
        if !derivatives {
            return PointEval {
                psi,
                t1: 0.0,
                t2: 0.0,
                rows: keep_rows.then(|| (w, Vec::new(), Vec::new())),
            };
        }
        let mut b = y;
        factor.solve_upper(&mut b);
        let wp: Vec<f64> = (0..r).map(|k| d2[k] * w[k] * inv_s3).collect();
        let t1: f64 = b.iter().zip(&wp).map(|(bi, wi)| bi * wi).sum();
        let up = u_prime.as_ref().expect("derivative path");
        let mut t2 = 0.0;
        for j in 0..r {
            let mut v = 0.0;
            for k in 0..r {
                v += up.get(j, k) * b[k];
            }
            t2 += b[j] * v;
        }
        PointEval {
            psi,
            t1,
            t2,
            rows: keep_rows.then(|| (w, wp, b)),
        }
    };

    let points: Vec<PointEval> = if ctx.n >= PAR_THRESHOLD {
        (0..ctx.n).into_par_iter().map(eval_point).collect()
    } else {
        (0..ctx.n).map(eval_point).collect()
    };

    Ok(EvalCore {
        u,
        u_prime,
        ridge_applied: factor.ridge_applied,
        points,
    })
}

fn g_from_core(core: &EvalCore, n: usize) -> f64 {
    let psi: Vec<f64> = core.points.iter().map(|p| p.psi).collect();
    blocked_sum(&psi) / n as f64
}

fn h_from_core(core: &EvalCore, n: usize) -> f64 {
    let t1: Vec<f64> = core.points.iter().map(|p| p.t1).collect();
    let t2: Vec<f64> = core.points.iter().map(|p| p.t2).collect();
    (2.0 * blocked_sum(&t1) - blocked_sum(&t2)) / n as f64
}

/// Squared norm of the projection of one point's kernel image onto the
/// landmark span; lies in `[0, 1]` up to solver round-off.
pub fn psi(ctx: &TraceContext, i: usize, s: Bandwidth) -> Result<f64> {
    if i >= ctx.n {
        return Err(Error::Usage(format!(
            "point index {i} out of range for {} rows",
            ctx.n
        )));
    }
    let sv = s.get();
    let u = build_u(ctx, sv);
    let u_spd = SpdMatrix::from_mat(&u)?;
    let factor = SpdFactor::new(&u_spd, DEFAULT_RIDGE)?;
    let mut y: Vec<f64> = ctx
        .d2_xz
        .row(i)
        .iter()
        .map(|&d| kernel_from_dist2(d, sv))
        .collect();
    factor.solve_lower(&mut y);
    Ok(y.iter().map(|v| v * v).sum())
}

/// Mean projection quality over the data.
pub fn g(ctx: &TraceContext, s: Bandwidth) -> Result<f64> {
    let core = eval_core(ctx, s.get(), DEFAULT_RIDGE, false, false)?;
    Ok(g_from_core(&core, ctx.n))
}

/// Closed-form bandwidth derivative of [`g`].
pub fn h(ctx: &TraceContext, s: Bandwidth) -> Result<f64> {
    let core = eval_core(ctx, s.get(), DEFAULT_RIDGE, true, false)?;
    Ok(h_from_core(&core, ctx.n))
}

/// Full diagnostic evaluation at one bandwidth.
#[derive(Debug, Clone)]
pub struct TraceEvaluation {
    pub s: f64,
    /// Landmark kernel matrix `U(s)` (unit diagonal).
    pub u: Mat,
    /// Entry-wise derivative `U'(s)`.
    pub u_prime: Mat,
    /// `N x r` kernel values `W` between data and landmarks.
    pub w: Mat,
    /// `N x r` entry-wise derivatives `W'`.
    pub w_prime: Mat,
    /// `N x r` projection coefficients `B_i = U^{-1} W_i`, one row per point.
    pub b: Mat,
    /// Per-point projection qualities.
    pub psi_values: Vec<f64>,
    pub g: f64,
    pub h: f64,
    /// Ridge the landmark solve actually used.
    pub ridge_applied: f64,
}

/// Evaluates `psi`, `g`, and `h` at one bandwidth, keeping all intermediate
/// matrices for inspection.
pub fn evaluate(ctx: &TraceContext, s: Bandwidth, ridge: f64) -> Result<TraceEvaluation> {
    let sv = s.get();
    let core = eval_core(ctx, sv, ridge, true, true)?;
    let g = g_from_core(&core, ctx.n);
    let h = h_from_core(&core, ctx.n);
    let r = ctx.r;
    let mut w = Mat::zeros(ctx.n, r);
    let mut w_prime = Mat::zeros(ctx.n, r);
    let mut b = Mat::zeros(ctx.n, r);
    let mut psi_values = Vec::with_capacity(ctx.n);
    for (i, p) in core.points.iter().enumerate() {
        psi_values.push(p.psi);
        let (wr, wpr, br) = p.rows.as_ref().expect("rows kept");
        w.row_mut(i).copy_from_slice(wr);
        w_prime.row_mut(i).copy_from_slice(wpr);
        b.row_mut(i).copy_from_slice(br);
    }
    Ok(TraceEvaluation {
        s: sv,
        u: core.u,
        u_prime: core.u_prime.expect("derivative path"),
        w,
        w_prime,
        b,
        psi_values,
        g,
        h,
        ridge_applied: core.ridge_applied,
    })
}

/// Configuration for [`select_bandwidth_trace`].
#[derive(Debug, Clone)]
pub struct BandwidthSearchConfig {
    /// Number of landmarks (`r`).
    pub landmark_count: usize,
    /// Lower bracket edge; `None` selects `0.05 * median pairwise distance`.
    pub s_min: Option<f64>,
    /// Upper bracket edge; `None` selects `10 * max pairwise distance`.
    pub s_max: Option<f64>,
    /// Number of log-spaced grid points.
    pub grid_size: usize,
    /// Relative width at which golden-section refinement stops.
    pub refine_tol: f64,
    /// Starting ridge for the landmark solves.
    pub ridge: f64,
    /// Seed for landmark selection and bracket subsampling.
    pub seed: u64,
}

impl Default for BandwidthSearchConfig {
    fn default() -> Self {
        Self {
            landmark_count: DEFAULT_LANDMARK_COUNT,
            s_min: None,
            s_max: None,
            grid_size: 50,
            refine_tol: 1e-4,
            ridge: DEFAULT_RIDGE,
            seed: 0,
        }
    }
}

/// One grid entry of a search profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub s: f64,
    pub g: f64,
    pub h: f64,
}

/// The evaluated search grid plus the selected bandwidth.
#[derive(Debug, Clone)]
pub struct TraceProfile {
    /// Grid entries in ascending bandwidth order.
    pub points: Vec<ProfilePoint>,
    /// Index of the grid point whose neighborhood was refined.
    pub selected: usize,
    /// Refined maximizer of `h`.
    pub s_star: f64,
}

impl TraceProfile {
    /// Renders the profile as CSV with header `s,g,h,selected`; the selected
    /// grid row carries a 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,g,h,selected\n");
        for (i, p) in self.points.iter().enumerate() {
            let flag = if i == self.selected { 1 } else { 0 };
            out.push_str(&format!("{},{},{},{}\n", p.s, p.g, p.h, flag));
        }
        out
    }
}

/// Result of the full bandwidth search.
#[derive(Debug, Clone)]
pub struct TraceSelection {
    pub bandwidth: Bandwidth,
    pub profile: TraceProfile,
    pub landmarks: LandmarkSet,
}

/// Mixing constant for deriving the bracket-subsample seed from the user seed.
const BRACKET_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Data-driven bracket: `[0.05 * median distance, 10 * max distance]` over a
/// seeded subsample of at most 1000 rows. Zero distances (duplicate rows) are
/// excluded from the median so the lower edge stays positive.
fn auto_bracket(data: &DataMatrix, seed: u64) -> Result<(f64, f64)> {
    use rand::{Rng, SeedableRng};
    let n = data.n_rows();
    let cap = 1000;
    let sub = if n <= cap {
        data.clone()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ BRACKET_SEED_SALT);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..cap {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
        }
        idx.truncate(cap);
        idx.sort_unstable();
        data.select(&idx)
    };
    let m = sub.n_rows();
    let d2 = squared_distances(&sub, &sub)?;
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    let mut d_max: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = d2.get(i, j).sqrt();
            d_max = d_max.max(d);
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::InsufficientData(
            "all sampled rows coincide; cannot bracket a bandwidth".into(),
        ));
    }
    dists.sort_by(f64::total_cmp);
    Ok((0.05 * median(&dists), 10.0 * d_max))
}

pub(crate) fn log_grid(s_min: f64, s_max: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (s_min.ln(), s_max.ln());
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                s_max
            } else {
                (lo + step * i as f64).exp()
            }
        })
        .collect()
}

/// Golden-section maximization on `[a, b]`; stops when the interval is
/// narrower than `tol` and returns the interval midpoint.
fn golden_max(
    mut a: f64,
    mut b: f64,
    tol: f64,
    f: &mut impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn validate_config(cfg: &BandwidthSearchConfig) -> Result<()> {
    if cfg.landmark_count == 0 {
        return Err(Error::Usage("landmark count must be positive".into()));
    }
    if cfg.grid_size < 8 {
        return Err(Error::Usage(format!(
            "grid size must be at least 8, got {}",
            cfg.grid_size
        )));
    }
    if !(cfg.refine_tol > 0.0 && cfg.refine_tol <= 0.1) {
        return Err(Error::Usage(format!(
            "refine tolerance must lie in (0, 0.1], got {}",
            cfg.refine_tol
        )));
    }
    if !(0.0..=RIDGE_CAP).contains(&cfg.ridge) {
        return Err(Error::Usage(format!(
            "ridge must lie in [0, {RIDGE_CAP}], got {}",
            cfg.ridge
        )));
    }
    if let (Some(lo), Some(hi)) = (cfg.s_min, cfg.s_max) {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Usage(format!(
                "bracket edges must satisfy 0 < s_min < s_max, got [{lo}, {hi}]"
            )));
        }
    }
    if let Some(lo) = cfg.s_min {
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(Error::Usage(format!("s_min must be positive, got {lo}")));
        }
    }
    if let Some(hi) = cfg.s_max {
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(Error::Usage(format!("s_max must be positive, got {hi}")));
        }
    }
    Ok(())
}

/// Selects the bandwidth maximizing `h` over a log grid with golden-section
/// refinement.
///
/// The grid spans the configured bracket (or the data-driven default). If the
/// grid argmax lands on an endpoint, the bracket expands once by a factor of
/// ten in that direction before the search fails with a bracket error. Grid
/// points whose landmark solve fails even at the ridge cap are treated as
///// closed bracket edges: never selected and never expanded past.
pub fn select_bandwidth_trace(
    data: &DataMatrix,
    cfg: &BandwidthSearchConfig,
) -> Result<TraceSelection> {
    validate_config(cfg)?;
    if data.n_rows() < cfg.landmark_count + 1 {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot support {} landmarks",
            data.n_rows(),
            cfg.landmark_count
        )));
    }
    let landmarks = select_landmarks(data, cfg.landmark_count, cfg.seed)?;
    let ctx = TraceContext::new(data, &landmarks)?;

    let (auto_lo, auto_hi) = match (cfg.s_min, cfg.s_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            let (lo, hi) = auto_bracket(data, cfg.seed)?;
            (cfg.s_min.unwrap_or(lo), cfg.s_max.unwrap_or(hi))
        }
    };
    if !(auto_lo > 0.0 && auto_lo < auto_hi) {
        return Err(Error::Bracket(format!(
            "invalid bracket [{auto_lo}, {auto_hi}]"
        )));
    }

    let mut s_min = auto_lo;
    let mut s_max = auto_hi;
    let mut expanded_low = false;
    let mut expanded_high = false;

    loop {
        let grid = log_grid(s_min, s_max, cfg.grid_size);
        // Evaluate the grid; solver failures at extreme bandwidths become
        // closed edges rather than hard errors.
        let mut entries: Vec<(f64, Option<(f64, f64)>)> = Vec::with_capacity(grid.len());
        for &s in &grid {
            match eval_core(&ctx, s, cfg.ridge, true, false) {
                Ok(core) => {
                    let gv = g_from_core(&core, ctx.n);
                    let hv = h_from_core(&core, ctx.n);
                    entries.push((s, Some((gv, hv))));
                }
                Err(Error::Numerical(_)) => entries.push((s, None)),
                Err(e) => return Err(e),
            }
        }
        let mut best: Option<usize> = None;
        for (i, (_, v)) in entries.iter().enumerate() {
            if let Some((_, hv)) = v {
                if best.map_or(true, |b| {
                    let (_, Some((_, hb))) = &entries[b] else {
                        unreachable!()
                    };
                    hv > hb
                }) {
                    best = Some(i);
                }
            }
        }
        let best = best.ok_or_else(|| {
            Error::Numerical("criterion evaluation failed across the entire grid".into())
        })?;

        // Endpoint handling: expand once per side, then give up.
        if best == 0 {
            if !expanded_low {
                expanded_low = true;
                s_min /= 10.0;
                continue;
            }
            return Err(Error::Bracket(format!(
                "criterion still rises toward the lower edge at s = {}",
                entries[0].0
            )));
        }
        if best == entries.len() - 1 && entries[best].1.is_some() {
            if !expanded_high {
                expanded_high = true;
                s_max *= 10.0;
                continue;
            }
            return Err(Error::Bracket(format!(
                "criterion still rises toward the upper edge at s = {}",
                entries[best].0
            )));
        }

        // Refinement bracket: nearest evaluable neighbors of the argmax.
        let lo_idx = (0..best)
            .rev()
            .find(|&i| entries[i].1.is_some())
            .unwrap_or(best);
        let hi_idx = ((best + 1)..entries.len())
            .find(|&i| entries[i].1.is_some())
            .unwrap_or(best);
        let (t_lo, t_hi) = (entries[lo_idx].0.ln(), entries[hi_idx].0.ln());
        let mut eval_h = |t: f64| -> Result<f64> {
            let core = eval_core(&ctx, t.exp(), cfg.ridge, true, false)?;
            Ok(h_from_core(&core, ctx.n))
        };
        let s_star = if t_hi > t_lo {
            golden_max(t_lo, t_hi, cfg.refine_tol, &mut eval_h)?.exp()
        } else {
            entries[best].0
        };

        let points = entries
            .iter()
            .filter_map(|(s, v)| v.map(|(gv, hv)| ProfilePoint { s: *s, g: gv, h: hv }))
            .collect::<Vec<_>>();
        // The selected index refers to the filtered (evaluable) profile.
        let selected = points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.s - entries[best].0)
                    .abs()
                    .total_cmp(&(b.s - entries[best].0).abs())
            })
            .map(|(i, _)| i)
            .expect("profile nonempty");

        return Ok(TraceSelection {
            bandwidth: Bandwidth::new(s_star)?,
            profile: TraceProfile {
                points,
                selected,
                s_star,
            },
            landmarks,
        });
    }
}

/// Convenience wrapper for callers that need `psi`, `g`, `h` on many points:
/// evaluates the whole context once and returns the per-point values.
pub fn psi_values(ctx: &TraceContext, s: Bandwidth, ridge: f64) -> Result<Vec<f64>> {
    let core = eval_core(ctx, s.get(), ridge, false, false)?;
    Ok(core.points.iter().map(|p| p.psi).collect())
}

/// `g` and `h` in one pass (single factorization).
pub fn g_and_h(ctx: &TraceContext, s: Bandwidth, ridge: f64) -> Result<(f64, f64)> {
    let core = eval_core(ctx, s.get(), ridge, true, false)?;
    Ok((g_from_core(&core, ctx.n), h_from_core(&core, ctx.n)))
}

/// Solves `U(s) B = W^T` for a caller-supplied right-hand side; exposed for
/// diagnostics so external checks can reproduce the projection coefficients.
pub fn projection_coefficients(
    ctx: &TraceContext,
    s: Bandwidth,
    ridge: f64,
) -> Result<(Mat, f64)> {
    let sv = s.get();
    let u = build_u(ctx, sv);
    let u_spd = SpdMatrix::from_mat(&u)?;
    let r = ctx.r;
    let mut rhs = Mat::zeros(r, ctx.n);
    for i in 0..ctx.n {
        for k in 0..r {
            rhs.set(k, i, kernel_from_dist2(ctx.d2_xz.get(i, k), sv));
        }
    }
    let solve = spd_solve(&u_spd, &rhs, ridge)?;
    Ok((solve.solutions, solve.ridge_applied))
}
