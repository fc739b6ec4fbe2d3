//! Synthetic geometry generators for training and evaluation sets.
//!
//! Every generator is a pure function of its seed: the same inputs produce
//! bitwise-identical output on every run and at any thread count. Evaluation
//! sets pair interior samples (inliers) with samples from a thin shell just
//! outside the support (outliers), which is what makes the downstream
//! classification metrics meaningful.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Ground-truth label for an evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Inlier,
    Outlier,
}

/// Evaluation rows together with their ground-truth labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub data: DataMatrix,
    pub labels: Vec<Label>,
}

/// Stateless seed derivation (SplitMix64 steps over the packed inputs) so
/// that independent sampling streams never share a generator state.
pub(crate) fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ index)
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the logarithm away from zero.
    let u1 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn unit_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

// ---------------------------------------------------------------------------
// Polygons
// ---------------------------------------------------------------------------

/// Recipe for a random simple polygon around the origin.
#[derive(Debug, Clone)]
pub struct PolygonSpec {
    pub vertices: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl PolygonSpec {
    pub fn new(vertices: usize, seed: u64) -> Self {
        Self {
            vertices,
            r_min: 3.0,
            r_max: 5.0,
            seed,
        }
    }
}

/// A simple polygon with positive (counterclockwise) area.
#[derive(Debug, Clone)]
pub struct Polygon {
    pts: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    let cr = cross(a, b, p);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cr.abs() > tol * len.max(1.0) {
        return false;
    }
    let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
    dot >= -tol && dot <= len * len + tol
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], p4: [f64; 2]) -> bool {
    let d1 = cross(p3, p4, p1);
    let d2 = cross(p3, p4, p2);
    let d3 = cross(p1, p2, p3);
    let d4 = cross(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, p3, p4, 0.0))
        || (d2 == 0.0 && on_segment(p2, p3, p4, 0.0))
        || (d3 == 0.0 && on_segment(p3, p1, p2, 0.0))
        || (d4 == 0.0 && on_segment(p4, p1, p2, 0.0))
}

impl Polygon {
    /// Validates that the vertex loop is simple and counterclockwise.
    pub fn new(pts: Vec<[f64; 2]>) -> Result<Self> {
        let k = pts.len();
        if k < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "a polygon needs at least 3 vertices, got {k}"
            )));
        }
        let poly = Self { pts };
        if !poly.is_simple() {
            return Err(Error::DegenerateGeometry(
                "polygon edges cross each other".into(),
            ));
        }
        if poly.signed_area() <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "polygon has non-positive signed area".into(),
            ));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.pts
    }

    /// Shoelace signed area; positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let k = self.pts.len();
        let mut acc = 0.0;
        for i in 0..k {
            let a = self.pts[i];
            let b = self.pts[(i + 1) % k];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        acc / 2.0
    }

    fn is_simple(&self) -> bool {
        let k = self.pts.len();
        for i in 0..k {
            let a1 = self.pts[i];
            let a2 = self.pts[(i + 1) % k];
            for j in (i + 1)..k {
                // Skip edges sharing a vertex (consecutive, and the
                // first/last pair which closes the loop).
                if j == i + 1 || (i == 0 && j == k - 1) {
                    continue;
                }
                let b1 = self.pts[j];
                let b2 = self.pts[(j + 1) % k];
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Axis-aligned bounding box as (x_min, x_max, y_min, y_max).
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for p in &self.pts {
            x_min = x_min.min(p[0]);
            x_max = x_max.max(p[0]);
            y_min = y_min.min(p[1]);
            y_max = y_max.max(p[1]);
        }
        (x_min, x_max, y_min, y_max)
    }

    /// Even-odd ray-crossing membership test; points on the boundary
    /// (within a small absolute tolerance) count as inside.
    pub fn contains(&self, pt: [f64; 2]) -> bool {
        let k = self.pts.len();
        for i in 0..k {
            if on_segment(pt, self.pts[i], self.pts[(i + 1) % k], 1e-12) {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..k {
            let a = self.pts[i];
            let b = self.pts[(i + 1) % k];
            if (a[1] > pt[1]) != (b[1] > pt[1]) {
                let x_cross = a[0] + (pt[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if pt[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Draws a random simple polygon: the first vertex sits on the positive
/// x-axis, the remaining angles are sorted uniforms, and every radius is
/// uniform in `[r_min, r_max]`. Draws are retried until the loop validates.
pub fn random_polygon(spec: &PolygonSpec) -> Result<Polygon> {
    if spec.vertices < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "a polygon needs at least 3 vertices, got {}",
            spec.vertices
        )));
    }
    if !(spec.r_min > 0.0 && spec.r_max >= spec.r_min) {
        return Err(Error::DegenerateGeometry(format!(
            "invalid radius range [{}, {}]",
            spec.r_min, spec.r_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..100 {
        let mut angles = vec![0.0];
        angles.extend((1..spec.vertices).map(|_| rng.random_range(0.0..std::f64::consts::TAU)));
        angles[1..].sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
        let pts: Vec<[f64; 2]> = angles
            .iter()
            .map(|&theta| {
                let r = rng.random_range(spec.r_min..spec.r_max);
                [r * theta.cos(), r * theta.sin()]
            })
            .collect();
        if let Ok(poly) = Polygon::new(pts) {
            return Ok(poly);
        }
    }
    Err(Error::DegenerateGeometry(format!(
        "no simple polygon with {} vertices after 100 draws (seed {})",
        spec.vertices, spec.seed
    )))
}

/// Uniform samples from the polygon interior via bounding-box rejection.
pub fn sample_polygon_interior(poly: &Polygon, n: usize, seed: u64) -> Result<DataMatrix> {
    let (x_min, x_max, y_min, y_max) = poly.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while rows.len() < n {
        attempts += 1;
        if attempts >= 100_000 && (rows.len() as f64) < 1e-3 * attempts as f64 {
            return Err(Error::DegenerateGeometry(format!(
                "polygon rejection sampling accepted {} of {attempts} draws",
                rows.len()
            )));
        }
        let x = rng.random_range(x_min..x_max);
        let y = rng.random_range(y_min..y_max);
        if poly.contains([x, y]) {
            rows.push(vec![x, y]);
        }
    }
    DataMatrix::from_rows(&rows)
}

// ---------------------------------------------------------------------------
// Spheres and cubes
// ---------------------------------------------------------------------------

/// Supported solid shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Cube,
}

/// One solid: its kind, dimension, half-width/radius, center, and the
/// relative thickness of the outlier shell hugging its surface.
#[derive(Debug, Clone)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub dim: usize,
    pub scale: f64,
    pub center: Vec<f64>,
    pub shell_width: f64,
}

impl ShapeSpec {
    pub fn origin(kind: ShapeKind, dim: usize, scale: f64, shell_width: f64) -> Self {
        Self {
            kind,
            dim,
            scale,
            center: vec![0.0; dim],
            shell_width,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::DegenerateGeometry("shape dimension is zero".into()));
        }
        if self.center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.center.len(),
            });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "shape scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.shell_width > 0.0 && self.shell_width.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "shell width must be positive, got {}",
                self.shell_width
            )));
        }
        Ok(())
    }
}

/// Uniform samples from the solid interior.
///
/// Spheres use the exact radial law `r = scale * u^(1/dim)` with an isotropic
/// direction; cubes are uniform per coordinate.
pub fn sample_shape_interior(spec: &ShapeSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.dim;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = match spec.kind {
            ShapeKind::Sphere => {
                let dir = unit_direction(&mut rng, p);
                let r = spec.scale * rng.random::<f64>().powf(1.0 / p as f64);
                dir.iter()
                    .zip(&spec.center)
                    .map(|(d, c)| c + r * d)
                    .collect()
            }
            ShapeKind::Cube => (0..p)
                .map(|j| spec.center[j] + rng.random_range(-spec.scale..spec.scale))
                .collect(),
        };
        rows.push(row);
    }
    DataMatrix::from_rows(&rows)
}

/// Uniform samples from the thin shell just outside the solid: radii in
/// `(scale, scale * (1 + shell_width)]` for spheres (exact inverse-CDF of the
/// uniform radial law), and the box frame between the inner and outer cube
/// for cubes (rejection).
pub fn sample_shape_shell(spec: &ShapeSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.dim;
    let outer = spec.scale * (1.0 + spec.shell_width);
    let mut rows = Vec::with_capacity(n);
    match spec.kind {
        ShapeKind::Sphere => {
            let rp_lo = spec.scale.powi(p as i32);
            let rp_hi = outer.powi(p as i32);
            for _ in 0..n {
                let dir = unit_direction(&mut rng, p);
                // 1 - u lies in (0, 1], so the radius is strictly above the
                // inner surface.
                let u = 1.0 - rng.random::<f64>();
                let r = (rp_lo + u * (rp_hi - rp_lo)).powf(1.0 / p as f64);
                rows.push(
                    dir.iter()
                        .zip(&spec.center)
                        .map(|(d, c)| c + r * d)
                        .collect::<Vec<f64>>(),
                );
            }
        }
        ShapeKind::Cube => {
            let mut attempts: u64 = 0;
            let cap = 100_000 + 1_000 * n as u64;
            while rows.len() < n {
                attempts += 1;
                if attempts > cap {
                    return Err(Error::DegenerateGeometry(format!(
                        "cube frame sampling accepted {} of {attempts} draws",
                        rows.len()
                    )));
                }
                let offsets: Vec<f64> =
                    (0..p).map(|_| rng.random_range(-outer..outer)).collect();
                let peak = offsets.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if peak > spec.scale {
                    rows.push(
                        offsets
                            .iter()
                            .zip(&spec.center)
                            .map(|(o, c)| c + o)
                            .collect(),
                    );
                }
            }
        }
    }
    DataMatrix::from_rows(&rows)
}

/// Balanced evaluation set: for each shape, `n_per_shape / 2` interior
/// inliers and `n_per_shape / 2` shell outliers, shuffled together.
pub fn labeled_eval_set(specs: &[ShapeSpec], n_per_shape: usize, seed: u64) -> Result<LabeledSet> {
    if specs.is_empty() {
        return Err(Error::InsufficientData("no shapes to sample".into()));
    }
    if n_per_shape == 0 || n_per_shape % 2 != 0 {
        return Err(Error::Usage(format!(
            "evaluation size per shape must be even and positive, got {n_per_shape}"
        )));
    }
    let half = n_per_shape / 2;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(specs.len() * n_per_shape);
    let mut labels = Vec::with_capacity(specs.len() * n_per_shape);
    for (q, spec) in specs.iter().enumerate() {
        let inliers = sample_shape_interior(spec, half, derive_seed(seed, q as u64, 0))?;
        let outliers = sample_shape_shell(spec, half, derive_seed(seed, q as u64, 1))?;
        for row in inliers.rows() {
            rows.push(row.to_vec());
            labels.push(Label::Inlier);
        }
        for row in outliers.rows() {
            rows.push(row.to_vec());
            labels.push(Label::Outlier);
        }
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX, 2));
    order.shuffle(&mut rng);
    let shuffled_rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let shuffled_labels: Vec<Label> = order.iter().map(|&i| labels[i]).collect();
    Ok(LabeledSet {
        data: DataMatrix::from_rows(&shuffled_rows)?,
        labels: shuffled_labels,
    })
}

/// A scene of several congruent solids with its training and evaluation data.
#[derive(Debug, Clone)]
pub struct MultiShapeSet {
    pub train: DataMatrix,
    pub eval: LabeledSet,
    pub specs: Vec<ShapeSpec>,
}

/// Places `m` unit solids with well-separated random centers, then samples
/// training interiors and a balanced labeled evaluation set.
pub fn multi_shape(
    kind: ShapeKind,
    m: usize,
    dim: usize,
    n_train_per_shape: usize,
    n_eval_per_shape: usize,
    shell_width: f64,
    seed: u64,
) -> Result<MultiShapeSet> {
    if m == 0 {
        return Err(Error::Usage("need at least one shape".into()));
    }
    if dim == 0 {
        return Err(Error::DegenerateGeometry("shape dimension is zero".into()));
    }
    let scale = 1.0;
    // Box side grows with the shape count so the packing stays feasible.
    let side = 10.0 * (m as f64).powf(1.0 / dim as f64);
    let min_sep = 2.0 * scale * (1.0 + shell_width) + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0));
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while centers.len() < m {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::DegenerateGeometry(format!(
                "placed only {} of {m} centers after {attempts} draws",
                centers.len()
            )));
        }
        let cand: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-side / 2.0..side / 2.0))
            .collect();
        let ok = centers.iter().all(|c| {
            let d2: f64 = c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= min_sep
        });
        if ok {
            centers.push(cand);
        }
    }
    let specs: Vec<ShapeSpec> = centers
        .into_iter()
        .map(|center| ShapeSpec {
            kind,
            dim,
            scale,
            center,
            shell_width,
        })
        .collect();
    let train_parts: Vec<DataMatrix> = specs
        .iter()
        .enumerate()
        .map(|(q, spec)| sample_shape_interior(spec, n_train_per_shape, derive_seed(seed, q as u64, 10)))
        .collect::<Result<_>>()?;
    let train = DataMatrix::concat(&train_parts.iter().collect::<Vec<_>>())?;
    let eval = labeled_eval_set(&specs, n_eval_per_shape, derive_seed(seed, 1, 20))?;
    Ok(MultiShapeSet { train, eval, specs })
}

// ---------------------------------------------------------------------------
// Fixed 2-D scenes
// ---------------------------------------------------------------------------

fn annulus_points<R: Rng>(
    rng: &mut R,
    center: [f64; 2],
    r_in: f64,
    r_out: f64,
    n: usize,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            // Inverse CDF of the uniform area measure on the annulus.
            let u: f64 = rng.random();
            let r = (r_in * r_in + u * (r_out * r_out - r_in * r_in)).sqrt();
            vec![center[0] + r * theta.cos(), center[1] + r * theta.sin()]
        })
        .collect()
}

/// The fixed three-component 2-D scene: two rings of inner radius 1.5 and
/// outer radius 2.5 centered at (-4, 0) and (4, 0), plus a disc of radius 1
/// at (0, 4); 1000 uniform points per component, in that order.
pub fn two_donuts_circle(seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = annulus_points(&mut rng, [-4.0, 0.0], 1.5, 2.5, 1000);
    rows.extend(annulus_points(&mut rng, [4.0, 0.0], 1.5, 2.5, 1000));
    rows.extend(annulus_points(&mut rng, [0.0, 4.0], 0.0, 1.0, 1000));
    DataMatrix::from_rows(&rows).expect("fixed scene is well-formed")
}

/// Isotropic Gaussian blobs: `n_per_center` points around each center with
/// the given standard deviation.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    n_per_center: usize,
    std_dev: f64,
    seed: u64,
) -> Result<DataMatrix> {
    if centers.is_empty() {
        return Err(Error::InsufficientData("no blob centers".into()));
    }
    let dim = centers[0].len();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: centers.iter().map(|c| c.len()).find(|&l| l != dim).unwrap_or(dim),
        });
    }
    if !(std_dev > 0.0 && std_dev.is_finite()) {
        return Err(Error::Usage(format!(
            "blob standard deviation must be positive, got {std_dev}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(centers.len() * n_per_center);
    for center in centers {
        for _ in 0..n_per_center {
            rows.push(
                center
                    .iter()
                    .map(|c| c + std_dev * standard_normal(&mut rng))
                    .collect::<Vec<f64>>(),
            );
        }
    }
    DataMatrix::from_rows(&rows)
}
