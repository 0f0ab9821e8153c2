//! Baseline column-selection strategies: uniform random, sequential error
//! selection (SES) and leverage-score sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SeedError};
use crate::linalg::{leading_singular_vectors, numerical_rank, PowerOptions};
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};
use crate::oasis::{oasis_select, OasisConfig};

/// Residuals below this fraction of `‖X‖_F` count as exactly spanned.
pub const SES_RESIDUAL_FLOOR: f64 = 1e-12;
/// Tolerance used to pick the default leverage rank.
pub const LEVERAGE_RANK_TOL: f64 = 1e-8;
/// Largest `min(m, n)` for which the default leverage rank is computed.
pub const LEVERAGE_AUTO_RANK_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Oasis,
    Random,
    Ses,
    /// SES that always takes the largest residual instead of sampling.
    SesGreedy,
    Leverage,
}

impl SamplerMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Oasis => "oasis",
            SamplerMethod::Random => "random",
            SamplerMethod::Ses => "ses",
            SamplerMethod::SesGreedy => "ses-greedy",
            SamplerMethod::Leverage => "leverage",
        }
    }
}

impl std::str::FromStr for SamplerMethod {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oasis" => Ok(SamplerMethod::Oasis),
            "random" => Ok(SamplerMethod::Random),
            "ses" => Ok(SamplerMethod::Ses),
            "ses-greedy" => Ok(SamplerMethod::SesGreedy),
            "leverage" => Ok(SamplerMethod::Leverage),
            other => Err(SeedError::InvalidConfig(format!("unknown sampling method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    /// Number of columns `L`.
    pub columns: usize,
    pub seed: u64,
    /// Target rank for leverage scores; `None` picks the numerical rank.
    pub leverage_rank: Option<usize>,
}

impl SamplerSpec {
    pub fn new(method: SamplerMethod, columns: usize, seed: u64) -> Self {
        Self {
            method,
            columns,
            seed,
            leverage_rank: None,
        }
    }
}

/// Dispatches to the sampler named by `spec`. oASIS runs with its default configuration.
pub fn select_columns(x: &DataMatrix, spec: &SamplerSpec) -> Result<ColumnIndexSet> {
    match spec.method {
        SamplerMethod::Oasis => Ok(oasis_select(x, &OasisConfig::new(spec.columns, spec.seed))?.selected),
        SamplerMethod::Random => random_select(x, spec.columns, spec.seed),
        SamplerMethod::Ses => ses_select(x, spec.columns, spec.seed, false),
        SamplerMethod::SesGreedy => ses_select(x, spec.columns, spec.seed, true),
        SamplerMethod::Leverage => leverage_select(x, spec.columns, spec.leverage_rank, spec.seed),
    }
}

fn check_budget(l: usize, n: usize) -> Result<()> {
    if l == 0 || l > n {
        return Err(SeedError::InvalidConfig(format!(
            "number of columns must be in 1..={n}, got {l}"
        )));
    }
    Ok(())
}

/// `L` distinct indices drawn uniformly without replacement.
pub fn random_select(x: &DataMatrix, l: usize, seed: u64) -> Result<ColumnIndexSet> {
    let n = x.ncols();
    check_budget(l, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ColumnIndexSet::from_indices(rand::seq::index::sample(&mut rng, n, l).into_vec(), n)
}

/// Sequential error selection: each draw picks column `i` with probability
/// proportional to `‖x_i − P_S(x_i)‖`, or the largest residual when `greedy`.
///
/// Returns fewer than `L` columns once every residual has vanished.
pub fn ses_select(x: &DataMatrix, l: usize, seed: u64, greedy: bool) -> Result<ColumnIndexSet> {
    let (m, n) = x.shape();
    check_budget(l, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = SES_RESIDUAL_FLOOR * x.frobenius_norm();
    let mut residual = x.as_slice().to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(l);
    let mut selected = ColumnIndexSet::new();
    let mut taken = vec![false; n];

    while selected.len() < l {
        let norms: Vec<f64> = residual
            .par_chunks_exact(m)
            .map(|r| dot(r, r).sqrt())
            .collect();
        let weights: Vec<f64> = norms
            .iter()
            .zip(&taken)
            .map(|(&r, &t)| if t || r < floor { 0.0 } else { r })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            break;
        }
        let pick = if greedy {
            let mut best = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w > weights[best] {
                    best = i;
                }
            }
            best
        } else {
            WeightedIndex::new(&weights)
                .map_err(|e| SeedError::Degenerate(format!("SES weights: {e}")))?
                .sample(&mut rng)
        };

        // New orthonormal direction, re-orthogonalized against the basis.
        let mut q = residual[pick * m..(pick + 1) * m].to_vec();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(b, &q);
                q.iter_mut().zip(b).for_each(|(qi, bi)| *qi -= p * bi);
            }
        }
        let norm = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|v| *v /= norm);
        residual.par_chunks_exact_mut(m).for_each(|r| {
            let p = dot(&q, r);
            r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= p * qi);
        });
        basis.push(q);
        taken[pick] = true;
        selected.push(pick);
    }
    Ok(selected)
}

/// Normalized leverage scores `ℓ_i = ‖V_r[i, :]‖² / r` from the top `r` right
/// singular vectors.
pub fn leverage_scores(x: &DataMatrix, rank: usize) -> Result<Vec<f64>> {
    let triplets = leading_singular_vectors(x.as_dmatrix(), rank, PowerOptions::default())?;
    let v = &triplets.right;
    Ok((0..x.ncols())
        .map(|i| v.row(i).norm_squared() / rank as f64)
        .collect())
}

/// Default leverage rank: the numerical rank at `1e-8` when `min(m, n) ≤ 2000`.
pub fn default_leverage_rank(x: &DataMatrix) -> Result<usize> {
    let (m, n) = x.shape();
    if m.min(n) > LEVERAGE_AUTO_RANK_LIMIT {
        return Err(SeedError::InvalidConfig(format!(
            "leverage rank must be given when min(m, n) > {LEVERAGE_AUTO_RANK_LIMIT}"
        )));
    }
    Ok(numerical_rank(x.as_dmatrix(), LEVERAGE_RANK_TOL).max(1))
}

/// Draws `L` columns without replacement with probability proportional to
/// leverage. Fewer are returned when fewer than `L` scores are non-zero.
pub fn leverage_select(
    x: &DataMatrix,
    l: usize,
    rank: Option<usize>,
    seed: u64,
) -> Result<ColumnIndexSet> {
    let (m, n) = x.shape();
    check_budget(l, n)?;
    let rank = match rank {
        Some(r) if r == 0 || r > m.min(n) => {
            return Err(SeedError::InvalidConfig(format!(
                "leverage rank must be in 1..={}, got {r}",
                m.min(n)
            )))
        }
        Some(r) => r,
        None => default_leverage_rank(x)?,
    };
    let scores = leverage_scores(x, rank)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = rand::seq::index::sample_weighted(&mut rng, n, |i| scores[i], l)
        .map_err(|e| SeedError::Degenerate(format!("leverage weights: {e}")))?;
    ColumnIndexSet::from_indices(drawn.into_vec(), n)
}
