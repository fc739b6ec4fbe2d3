//! Landmark selection: seeded k-means++ cluster centers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kernel::squared_distances;

/// Default number of landmarks.
pub const DEFAULT_LANDMARK_COUNT: usize = 5;
/// Default Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 100;
/// Centers closer than this are considered coincident.
const COINCIDENT_DIST: f64 = 1e-12;
/// Retry budget (fresh seeds) when centers come out coincident.
const SELECT_RETRIES: u64 = 5;

/// A set of landmark points together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    points: DataMatrix,
    seed: u64,
}

impl LandmarkSet {
    /// Wraps explicitly chosen landmark points (no clustering). The points
    /// must be pairwise distinct beyond the coincidence threshold.
    pub fn from_points(points: DataMatrix, seed: u64) -> Result<Self> {
        let d2 = squared_distances(&points, &points)?;
        for i in 0..points.n_rows() {
            for j in (i + 1)..points.n_rows() {
                if d2.get(i, j).sqrt() <= COINCIDENT_DIST {
                    return Err(Error::Usage(format!(
                        "landmarks {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self { points, seed })
    }

    pub fn points(&self) -> &DataMatrix {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.n_rows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn nearest_center(d2_row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &d) in d2_row.iter().enumerate().skip(1) {
        if d < d2_row[best] {
            best = j;
        }
    }
    best
}

/// Assigns every row to its nearest center (ties break to the lowest center
/// index) and repairs empty clusters by moving in the point currently
/// farthest from its own center.
fn assign_with_repair(data: &DataMatrix, centers: &DataMatrix) -> Result<Vec<usize>> {
    let d2 = squared_distances(data, centers)?;
    let r = centers.n_rows();
    let mut assignment: Vec<usize> = (0..data.n_rows()).map(|i| nearest_center(d2.row(i))).collect();
    let mut counts = vec![0usize; r];
    for &a in &assignment {
        counts[a] += 1;
    }
    for empty in 0..r {
        while counts[empty] == 0 {
            let mut donor: Option<usize> = None;
            let mut worst = f64::NEG_INFINITY;
            for (i, &a) in assignment.iter().enumerate() {
                if counts[a] > 1 && d2.get(i, a) > worst {
                    worst = d2.get(i, a);
                    donor = Some(i);
                }
            }
            let i = donor.ok_or_else(|| {
                Error::InsufficientData("cannot repair empty cluster: too few points".into())
            })?;
            counts[assignment[i]] -= 1;
            assignment[i] = empty;
            counts[empty] += 1;
        }
    }
    Ok(assignment)
}

fn cluster_means(data: &DataMatrix, assignment: &[usize], r: usize) -> Result<DataMatrix> {
    let p = data.dim();
    let mut sums = vec![0.0; r * p];
    let mut counts = vec![0usize; r];
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        let row = data.row(i);
        for j in 0..p {
            sums[a * p + j] += row[j];
        }
    }
    for c in 0..r {
        debug_assert!(counts[c] > 0, "cluster {c} empty after repair");
        for j in 0..p {
            sums[c * p + j] /= counts[c] as f64;
        }
    }
    DataMatrix::from_flat(r, p, sums)
}

/// k-means++ initialization: the first center is uniform, each later center
/// is sampled with probability proportional to its squared distance from the
/// nearest already-chosen center.
fn plus_plus_init(data: &DataMatrix, r: usize, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    let n = data.n_rows();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2_min: Vec<f64> = {
        let c = data.select(&[first]);
        let d2 = squared_distances(data, &c)?;
        (0..n).map(|i| d2.get(i, 0)).collect()
    };
    while chosen.len() < r {
        let total: f64 = d2_min.iter().sum();
        let idx = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in d2_min.iter().enumerate() {
                cum += w;
                if cum > u {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave the cursor past the last positive weight.
            pick.unwrap_or_else(|| {
                d2_min
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total > 0 implies a positive weight")
            })
        } else {
            (0..n)
                .find(|i| !chosen.contains(i))
                .ok_or_else(|| Error::InsufficientData("fewer points than clusters".into()))?
        };
        chosen.push(idx);
        let c = data.select(&[idx]);
        let d2 = squared_distances(data, &c)?;
        for (i, slot) in d2_min.iter_mut().enumerate() {
            *slot = slot.min(d2.get(i, 0));
        }
    }
    Ok(data.select(&chosen))
}

/// Lloyd's algorithm with k-means++ initialization.
///
/// Deterministic for fixed `(data, r, seed)`. Converges when assignments stop
/// changing; on normal convergence the returned centers are exactly the means
/// of their assigned rows. Requires at least `r` distinct rows.
pub fn kmeans(
    data: &DataMatrix,
    r: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(DataMatrix, Vec<usize>)> {
    if r == 0 {
        return Err(Error::Usage("cluster count must be positive".into()));
    }
    if data.n_rows() < r {
        return Err(Error::InsufficientData(format!(
            "{} rows for {} clusters",
            data.n_rows(),
            r
        )));
    }
    if data.dedup_rows().n_rows() < r {
        return Err(Error::InsufficientData(format!(
            "fewer than {r} distinct rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(data, r, &mut rng)?;
    let mut assignment = assign_with_repair(data, &centers)?;
    for _ in 0..max_iter {
        let new_centers = cluster_means(data, &assignment, r)?;
        let new_assignment = assign_with_repair(data, &new_centers)?;
        centers = new_centers;
        let converged = new_assignment == assignment;
        assignment = new_assignment;
        if converged {
            break;
        }
    }
    Ok((centers, assignment))
}

/// Picks `r` landmarks as k-means centers of the distinct rows of `data`.
///
/// Duplicate rows are removed before clustering. If the centers come out
/// coincident (pairwise distance at most `1e-12`), the seed advances by one
/// and clustering retries, up to five attempts.
pub fn select_landmarks(data: &DataMatrix, r: usize, seed: u64) -> Result<LandmarkSet> {
    let distinct = data.dedup_rows();
    if distinct.n_rows() < r {
        return Err(Error::InsufficientData(format!(
            "{} distinct rows for {} landmarks",
            distinct.n_rows(),
            r
        )));
    }
    for attempt in 0..SELECT_RETRIES {
        let attempt_seed = seed.wrapping_add(attempt);
        let (centers, _) = kmeans(&distinct, r, attempt_seed, KMEANS_MAX_ITER)?;
        let d2 = squared_distances(&centers, &centers)?;
        let mut coincident = false;
        'outer: for i in 0..r {
            for j in (i + 1)..r {
                if d2.get(i, j).sqrt() <= COINCIDENT_DIST {
                    coincident = true;
                    break 'outer;
                }
            }
        }
        if !coincident {
            return Ok(LandmarkSet {
                points: centers,
                seed: attempt_seed,
            });
        }
    }
    Err(Error::Numerical(format!(
        "landmark selection produced coincident centers for {SELECT_RETRIES} consecutive seeds"
    )))
}
