//! Coreset memory bank and nearest-neighbor anomaly scoring.

use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureMatrix};
use crate::parallel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default coreset size.
pub const DEFAULT_BANK_SIZE: usize = 4000;

/// Raw min distances below this make max-normalization meaningless.
const DEGENERATE_NORM_EPS: f64 = 1e-12;

/// How the first coreset element is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoresetInit {
    /// Uniformly at random under the stored seed (the default).
    SeededRandom,
    /// The row with the largest Euclidean norm (ties by lowest index).
    MaxNorm,
}

/// Coreset of reference descriptor rows plus provenance metadata.
///
/// Every bank row is bit-identical to some source row; the coreset selects,
/// it never averages.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    pub layout: FeatureLayout,
    pub width: usize,
    /// Row-major coreset data, `len * width` values.
    pub data: Vec<f32>,
    /// Source-row index of each bank row.
    pub source_rows: Vec<u32>,
    pub seed: u64,
    pub source_id: String,
}

impl MemoryBank {
    pub fn len(&self) -> usize {
        self.source_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Per-point raw min-distances and max-normalized scores.
#[derive(Debug, Clone)]
pub struct AnomalyResult {
    pub min_dists: Vec<f64>,
    /// min_dists / max(min_dists), or all zeros when degenerate.
    pub scores: Vec<f64>,
    /// Index of the matched bank row per test row.
    pub nearest_bank_id: Vec<u32>,
    /// Set when the max raw distance fell below epsilon.
    pub degenerate_norm: bool,
    /// Source point index per row, copied from the scored matrix.
    pub point_ids: Vec<u32>,
}

/// Build a memory bank by greedy k-center selection.
///
/// The first element is chosen per `init`; each subsequent element is the
/// row farthest from the already-selected set (ties by lowest row index).
/// Selection stops at `min(m, rows)`. Deterministic given (input, m, seed).
pub fn build_memory(
    features: &FeatureMatrix,
    m: usize,
    seed: u64,
    init: CoresetInit,
    source_id: &str,
) -> Result<MemoryBank> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::parameter("cannot build a memory bank from an empty feature matrix"));
    }
    if m == 0 {
        return Err(Error::parameter("coreset size must be >= 1"));
    }
    let m = m.min(n);
    let width = features.width;

    let first = match init {
        CoresetInit::SeededRandom => ChaCha8Rng::seed_from_u64(seed).gen_range(0..n),
        CoresetInit::MaxNorm => {
            parallel::reduce_indexed(
                n,
                |i| (sq_norm(features.row(i)), i),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            )
            .unwrap()
            .1
        }
    };

    let mut selected = Vec::with_capacity(m);
    selected.push(first as u32);

    // Squared distance of every row to the nearest selected row.
    let mut min_d2: Vec<f64> = parallel::map_indexed(n, |i| {
        sq_dist(features.row(i), features.row(first))
    });

    while selected.len() < m {
        let last = *selected.last().unwrap() as usize;
        parallel::for_each_mut(&mut min_d2, |i, d| {
            let cand = sq_dist(features.row(i), features.row(last));
            if cand < *d {
                *d = cand;
            }
        });
        let (_, far) = parallel::reduce_indexed(
            n,
            |i| (min_d2[i], i),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        )
        .unwrap();
        selected.push(far as u32);
    }

    let mut data = Vec::with_capacity(m * width);
    for &row in &selected {
        data.extend_from_slice(features.row(row as usize));
    }
    Ok(MemoryBank {
        layout: features.layout.clone(),
        width,
        data,
        source_rows: selected,
        seed,
        source_id: source_id.to_string(),
    })
}

/// Greedy k-center selection with the candidate distances computed in a
/// lower-dimensional random projection (Achlioptas-style +-1 entries).
///
/// Only the selection is approximate: stored bank rows stay bit-identical
/// to source rows and scoring always uses full-dimension distances.
pub fn build_memory_projected(
    features: &FeatureMatrix,
    m: usize,
    seed: u64,
    init: CoresetInit,
    source_id: &str,
    projection_dim: usize,
) -> Result<MemoryBank> {
    if projection_dim == 0 || projection_dim >= features.width {
        return build_memory(features, m, seed, init, source_id);
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::parameter("cannot build a memory bank from an empty feature matrix"));
    }
    let width = features.width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let scale = 1.0 / (projection_dim as f32).sqrt();
    let proj: Vec<f32> = (0..width * projection_dim)
        .map(|_| if rng.gen::<bool>() { scale } else { -scale })
        .collect();

    let projected: Vec<f32> = parallel::map_indexed(n, |i| {
        let row = features.row(i);
        let mut out = vec![0.0f32; projection_dim];
        for (d, v) in row.iter().enumerate() {
            let base = d * projection_dim;
            for (o, p) in out.iter_mut().zip(&proj[base..base + projection_dim]) {
                *o += v * p;
            }
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();
    let prow = |i: usize| &projected[i * projection_dim..(i + 1) * projection_dim];

    let selected = {
        let m = m.min(n);
        let first = match init {
            CoresetInit::SeededRandom => ChaCha8Rng::seed_from_u64(seed).gen_range(0..n),
            CoresetInit::MaxNorm => {
                parallel::reduce_indexed(
                    n,
                    |i| (sq_norm(features.row(i)), i),
                    |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
                )
                .unwrap()
                .1
            }
        };
        let mut selected = vec![first as u32];
        let mut min_d2: Vec<f64> = parallel::map_indexed(n, |i| sq_dist(prow(i), prow(first)));
        while selected.len() < m {
            let last = *selected.last().unwrap() as usize;
            parallel::for_each_mut(&mut min_d2, |i, d| {
                let cand = sq_dist(prow(i), prow(last));
                if cand < *d {
                    *d = cand;
                }
            });
            let (_, far) = parallel::reduce_indexed(
                n,
                |i| (min_d2[i], i),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            )
            .unwrap();
            selected.push(far as u32);
        }
        selected
    };

    let mut data = Vec::with_capacity(selected.len() * width);
    for &row in &selected {
        data.extend_from_slice(features.row(row as usize));
    }
    Ok(MemoryBank {
        layout: features.layout.clone(),
        width,
        data,
        source_rows: selected,
        seed,
        source_id: source_id.to_string(),
    })
}

/// Max over rows of the distance to the nearest bank row.
pub fn coverage_radius(features: &FeatureMatrix, bank: &MemoryBank) -> f64 {
    parallel::reduce_indexed(
        features.rows(),
        |i| nearest(features.row(i), bank).0,
        f64::max,
    )
    .unwrap_or(0.0)
}

/// Score a test feature matrix against a memory bank.
///
/// `min_dists[i]` is the Euclidean distance from test row `i` to its nearest
/// bank row; scores are min_dists normalized by their maximum, with an
/// all-zero fallback when that maximum is below epsilon.
pub fn score(features: &FeatureMatrix, bank: &MemoryBank) -> Result<AnomalyResult> {
    if features.layout != bank.layout {
        return Err(Error::LayoutMismatch(format!(
            "test features ({} blocks, width {}) do not match bank ({} blocks, width {})",
            features.layout.blocks.len(),
            features.width,
            bank.layout.blocks.len(),
            bank.width,
        )));
    }
    let n = features.rows();
    let pairs: Vec<(f64, u32)> = parallel::map_indexed(n, |i| {
        let (d, id) = nearest(features.row(i), bank);
        (d, id as u32)
    });
    let min_dists: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let nearest_bank_id: Vec<u32> = pairs.iter().map(|p| p.1).collect();

    let max = min_dists.iter().cloned().fold(0.0, f64::max);
    let degenerate = max < DEGENERATE_NORM_EPS;
    let scores = if degenerate {
        vec![0.0; n]
    } else {
        min_dists.iter().map(|&d| d / max).collect()
    };
    Ok(AnomalyResult {
        min_dists,
        scores,
        nearest_bank_id,
        degenerate_norm: degenerate,
        point_ids: features.point_ids.clone(),
    })
}

/// Per-point anomaly mask: `scores[i] > threshold` (strict).
pub fn classify(result: &AnomalyResult, threshold: f64) -> Vec<bool> {
    result.scores.iter().map(|&s| s > threshold).collect()
}

fn nearest(row: &[f32], bank: &MemoryBank) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut best_id = 0usize;
    for b in 0..bank.len() {
        let d2 = sq_dist(row, bank.row(b));
        if d2 < best {
            best = d2;
            best_id = b;
        }
    }
    (best.sqrt(), best_id)
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

#[inline]
fn sq_norm(a: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &x in a {
        acc += x as f64 * x as f64;
    }
    acc
}
