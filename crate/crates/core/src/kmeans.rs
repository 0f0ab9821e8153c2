//! Lloyd's k-means with seeded k-means++ initialization and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SeedError};
use crate::matrix::DataMatrix;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster of each column, in `[0, k)`.
    pub labels: Vec<usize>,
    /// Centroids, one per cluster, each of length `m`.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
    /// Objective after every Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

/// Clusters the columns of `points` into `k` groups; best of `restarts` runs.
pub fn kmeans(points: &DataMatrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let n = points.ncols();
    if k == 0 || k > n {
        return Err(SeedError::InvalidConfig(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, plus_plus_init(points, k, &mut rng), k);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &DataMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.ncols();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points.column(first).to_vec()];
    let mut dist: Vec<f64> = points.columns().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Guard against rounding landing on an already-chosen point.
            if dist[pick] == 0.0 {
                pick = dist.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points.column(next).to_vec();
        for (d, p) in dist.iter_mut().zip(points.columns()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &DataMatrix, centroids: &[Vec<f64>], labels: &mut [usize]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut dists = Vec::with_capacity(labels.len());
    for (label, p) in labels.iter_mut().zip(points.columns()) {
        let (mut arg, mut best) = (0, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = sq_dist(p, centroid);
            if d < best {
                best = d;
                arg = c;
            }
        }
        *label = arg;
        total += best;
        dists.push(best);
    }
    (total, dists)
}

fn lloyd(points: &DataMatrix, mut centroids: Vec<Vec<f64>>, k: usize) -> KMeansResult {
    let (m, n) = points.shape();
    let mut labels = vec![0; n];
    let mut history = Vec::new();
    let (mut objective, mut dists) = assign(points, &centroids, &mut labels);
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points.columns()) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Empty clusters move to the point currently farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                centroids[c] = points.column(far).to_vec();
                dists[far] = 0.0;
            }
        }
        let previous = labels.clone();
        let (obj, d) = assign(points, &centroids, &mut labels);
        objective = obj;
        dists = d;
        history.push(objective);
        if labels == previous {
            break;
        }
    }
    KMeansResult {
        labels,
        centroids,
        objective,
        history,
    }
}
