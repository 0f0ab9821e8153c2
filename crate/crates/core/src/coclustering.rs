//! Bipartite spectral co-clustering of `|V|` (atoms × data points) and the
//! normalized-cut cost used to score a labeling.

use nalgebra::DMatrix;

use crate::error::{Result, SeedError};
use crate::kmeans::kmeans;
use crate::linalg::{leading_singular_vectors, PowerOptions};
use crate::matrix::DataMatrix;
use crate::sparse_coding::SparseCode;

/// Degrees are floored here before the inverse square root.
pub const DEGREE_FLOOR: f64 = 1e-12;
/// Singular values below this fraction of the top one carry no cluster structure.
pub const DEGENERATE_GAP: f64 = 1e-8;
const KMEANS_RESTARTS: usize = 10;
const POWER: PowerOptions = PowerOptions {
    tol: 1e-9,
    max_iter: 20_000,
};

/// Non-negative `L × N` weights with their row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    weights: DMatrix<f64>,
    row_degrees: Vec<f64>,
    col_degrees: Vec<f64>,
}

impl BipartiteGraph {
    pub fn from_dense(weights: DMatrix<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(SeedError::InvalidInput("empty weight matrix".into()));
        }
        if let Some(p) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            let l = weights.nrows();
            return Err(SeedError::InvalidInput(format!(
                "weight at row {}, column {} is not a finite non-negative number",
                p % l,
                p / l
            )));
        }
        let row_degrees = weights.row_iter().map(|r| r.sum()).collect();
        let col_degrees = weights.column_iter().map(|c| c.sum()).collect();
        Ok(Self {
            weights,
            row_degrees,
            col_degrees,
        })
    }

    /// Graph on `|V|`.
    pub fn from_code(code: &SparseCode) -> Self {
        let weights = code.to_dense().map(f64::abs);
        Self::from_dense(weights).expect("absolute coefficients are non-negative")
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn row_degrees(&self) -> &[f64] {
        &self.row_degrees
    }

    pub fn col_degrees(&self) -> &[f64] {
        &self.col_degrees
    }

    pub fn zero_degree_rows(&self) -> Vec<usize> {
        zero_positions(&self.row_degrees)
    }

    pub fn zero_degree_cols(&self) -> Vec<usize> {
        zero_positions(&self.col_degrees)
    }
}

fn zero_positions(d: &[f64]) -> Vec<usize> {
    d.iter().enumerate().filter(|(_, &v)| v == 0.0).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone)]
pub struct CoClusterResult {
    /// Label of every atom (row of `V`).
    pub row_labels: Vec<usize>,
    /// Label of every data point (column of `V`).
    pub col_labels: Vec<usize>,
    pub k: usize,
    /// Row-node coordinates, `L × ℓ`.
    pub row_embedding: DMatrix<f64>,
    /// Column-node coordinates, `N × ℓ`.
    pub col_embedding: DMatrix<f64>,
    /// Singular values of the normalized matrix, leading one included.
    pub singular_values: Vec<f64>,
    pub ncut_printed: NcutValues,
    pub ncut_conventional: NcutValues,
    /// No usable spectral gap: the embedding carries no cluster structure.
    pub degenerate: bool,
    /// Nodes with zero degree, labeled by nearest centroid.
    pub zero_degree_rows: Vec<usize>,
    pub zero_degree_cols: Vec<usize>,
}

/// Co-clusters the bipartite graph `|V|` into `k` groups.
pub fn cocluster(code: &SparseCode, k: usize, seed: u64) -> Result<CoClusterResult> {
    cocluster_graph(&BipartiteGraph::from_code(code), k, seed)
}

pub fn cocluster_graph(graph: &BipartiteGraph, k: usize, seed: u64) -> Result<CoClusterResult> {
    let (l, n) = graph.weights.shape();
    if k < 2 || k > l + n {
        return Err(SeedError::InvalidConfig(format!(
            "co-clustering needs 2 <= k <= {}, got {k}",
            l + n
        )));
    }
    let ell = (k as f64).log2().ceil() as usize;
    if ell + 1 > l.min(n) {
        return Err(SeedError::InvalidConfig(format!(
            "{k} clusters need {} singular vectors but V is {l}x{n}",
            ell + 1
        )));
    }
    let dr: Vec<f64> = graph.row_degrees.iter().map(|d| 1.0 / d.max(DEGREE_FLOOR).sqrt()).collect();
    let dc: Vec<f64> = graph.col_degrees.iter().map(|d| 1.0 / d.max(DEGREE_FLOOR).sqrt()).collect();
    let an = DMatrix::from_fn(l, n, |i, j| dr[i] * graph.weights[(i, j)] * dc[j]);
    let svd = leading_singular_vectors(&an, ell + 1, POWER)?;

    let row_embedding = DMatrix::from_fn(l, ell, |i, t| dr[i] * svd.left[(i, t + 1)]);
    let col_embedding = DMatrix::from_fn(n, ell, |j, t| dc[j] * svd.right[(j, t + 1)]);
    let degenerate = svd.values[1] <= DEGENERATE_GAP * svd.values[0];

    let zero_rows = graph.zero_degree_rows();
    let zero_cols = graph.zero_degree_cols();
    let mut active = Vec::with_capacity(l + n);
    let mut isolated = Vec::new();
    for i in 0..l {
        if graph.row_degrees[i] > 0.0 {
            active.push(i);
        } else {
            isolated.push(i);
        }
    }
    for j in 0..n {
        if graph.col_degrees[j] > 0.0 {
            active.push(l + j);
        } else {
            isolated.push(l + j);
        }
    }
    if active.len() < k {
        return Err(SeedError::Degenerate(format!(
            "only {} connected nodes for {k} clusters",
            active.len()
        )));
    }
    let coords = |node: usize| -> Vec<f64> {
        if node < l {
            row_embedding.row(node).iter().copied().collect()
        } else {
            col_embedding.row(node - l).iter().copied().collect()
        }
    };
    let points: Vec<Vec<f64>> = active.iter().map(|&p| coords(p)).collect();
    let km = kmeans(&DataMatrix::from_columns(&points)?, k, seed, KMEANS_RESTARTS)?;

    let mut labels = vec![0; l + n];
    for (&node, &lab) in active.iter().zip(&km.labels) {
        labels[node] = lab;
    }
    for &node in &isolated {
        let p = coords(node);
        let nearest = km
            .centroids
            .iter()
            .enumerate()
            .map(|(c, cen)| (c, p.iter().zip(cen).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(c, _)| c);
        labels[node] = nearest;
    }
    let col_labels = labels.split_off(l);
    let row_labels = labels;
    let ncut_printed = ncut_printed(graph, &row_labels, &col_labels, k)?;
    let ncut_conventional = ncut_conventional(graph, &row_labels, &col_labels, k)?;
    Ok(CoClusterResult {
        row_labels,
        col_labels,
        k,
        row_embedding,
        col_embedding,
        singular_values: svd.values,
        ncut_printed,
        ncut_conventional,
        degenerate,
        zero_degree_rows: zero_rows,
        zero_degree_cols: zero_cols,
    })
}

/// Per-class cut costs.
#[derive(Debug, Clone, PartialEq)]
pub struct NcutValues {
    pub per_class: Vec<f64>,
    /// Classes with a term whose denominator was zero (term taken as 0).
    pub empty_terms: Vec<usize>,
}

impl NcutValues {
    pub fn mean(&self) -> f64 {
        self.per_class.iter().sum::<f64>() / self.per_class.len() as f64
    }
}

/// Within-block mass, row-block mass and column-block mass of every class.
fn block_masses(
    graph: &BipartiteGraph,
    row_labels: &[usize],
    col_labels: &[usize],
    k: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let (l, n) = graph.weights.shape();
    if row_labels.len() != l || col_labels.len() != n {
        return Err(SeedError::InvalidInput(format!(
            "labels for {}x{} but V is {l}x{n}",
            row_labels.len(),
            col_labels.len()
        )));
    }
    if let Some(bad) = row_labels.iter().chain(col_labels).find(|&&c| c >= k) {
        return Err(SeedError::InvalidInput(format!("label {bad} out of range for k={k}")));
    }
    let mut masses = vec![(0.0, 0.0, 0.0); k];
    for j in 0..n {
        for i in 0..l {
            let w = graph.weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let (r, c) = (row_labels[i], col_labels[j]);
            if r == c {
                masses[r].0 += w;
            }
            masses[r].1 += w;
            masses[c].2 += w;
        }
    }
    Ok(masses)
}

fn ratio(num: f64, den: f64, class: usize, empty: &mut Vec<usize>) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        if empty.last() != Some(&class) {
            empty.push(class);
        }
        0.0
    }
}

/// The cut cost with the within-block mass in both numerators:
/// `W(R_k, C_k) / W(R_k, Ω) + W(R_k, C_k) / W(Ω, C_k)`. Perfect blocks score 2.
pub fn ncut_printed(
    graph: &BipartiteGraph,
    row_labels: &[usize],
    col_labels: &[usize],
    k: usize,
) -> Result<NcutValues> {
    let masses = block_masses(graph, row_labels, col_labels, k)?;
    let mut empty = Vec::new();
    let per_class = masses
        .iter()
        .enumerate()
        .map(|(c, &(within, rows, cols))| {
            ratio(within, rows, c, &mut empty) + ratio(within, cols, c, &mut empty)
        })
        .collect();
    Ok(NcutValues {
        per_class,
        empty_terms: empty,
    })
}

/// The cut cost with the mass leaving the block in the numerators. Perfect blocks score 0.
pub fn ncut_conventional(
    graph: &BipartiteGraph,
    row_labels: &[usize],
    col_labels: &[usize],
    k: usize,
) -> Result<NcutValues> {
    let masses = block_masses(graph, row_labels, col_labels, k)?;
    let mut empty = Vec::new();
    let per_class = masses
        .iter()
        .enumerate()
        .map(|(c, &(within, rows, cols))| {
            ratio(rows - within, rows, c, &mut empty) + ratio(cols - within, cols, c, &mut empty)
        })
        .collect();
    Ok(NcutValues {
        per_class,
        empty_terms: empty,
    })
}
