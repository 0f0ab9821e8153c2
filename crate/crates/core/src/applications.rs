//! Downstream uses of a decomposition: approximation-error curves, denoising
//! and outlier detection from code density.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Result, SeedError};
use crate::kmeans::kmeans;
use crate::linalg::least_squares_project;
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};
use crate::oasis::{oasis_select, OasisConfig};
use crate::pipeline::{reconstruct, seed_decompose, SeedConfig, SeedDecomposition, Variant};
use crate::samplers::{select_columns, SamplerMethod, SamplerSpec};
use crate::sparse_coding::StoppingRule;

/// Minimum number of seeds averaged for randomized samplers.
pub const MIN_SEEDS: usize = 5;

/// `‖X − P_S(X)‖²_F / ‖X‖²_F`; an empty selection scores 1.
pub fn approx_error(x: &DataMatrix, set: &ColumnIndexSet) -> Result<f64> {
    if set.is_empty() {
        return Ok(1.0);
    }
    let p = least_squares_project(x, set)?;
    let diff: f64 = x
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(diff / dot(x.as_slice(), x.as_slice()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub columns: usize,
    /// Error of every seed run, in seed order.
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean; 0 for a single run.
    pub stderr: f64,
    /// Mean wall time of the selection and projection, in seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub method: SamplerMethod,
    pub points: Vec<CurvePoint>,
    /// oASIS `max|Δ|` trace at the largest `L`; empty for other methods.
    pub delta_trace: Vec<f64>,
}

fn is_randomized(method: SamplerMethod) -> bool {
    matches!(
        method,
        SamplerMethod::Random | SamplerMethod::Ses | SamplerMethod::Leverage
    )
}

/// Approximation error of every method at every `L`. Randomized samplers
/// are averaged over `seeds`; deterministic ones run once with the first seed.
pub fn error_curve(
    x: &DataMatrix,
    methods: &[SamplerMethod],
    grid: &[usize],
    seeds: &[u64],
) -> Result<Vec<ApproxReport>> {
    if seeds.is_empty() {
        return Err(SeedError::InvalidConfig("at least one seed is required".into()));
    }
    if methods.iter().any(|&m| is_randomized(m)) && seeds.len() < MIN_SEEDS {
        return Err(SeedError::InvalidConfig(format!(
            "randomized samplers are averaged over at least {MIN_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    if let Some(&bad) = grid.iter().find(|&&l| l > x.ncols()) {
        return Err(SeedError::InvalidConfig(format!(
            "L = {bad} exceeds the {} columns",
            x.ncols()
        )));
    }

    let mut cells = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let run_seeds = if is_randomized(method) { seeds } else { &seeds[..1] };
        for (li, &l) in grid.iter().enumerate() {
            for &seed in run_seeds {
                cells.push((mi, li, l, method, seed));
            }
        }
    }
    let results = cells
        .par_iter()
        .map(|&(_, _, l, method, seed)| -> Result<(f64, f64)> {
            let start = Instant::now();
            let err = if l == 0 {
                1.0
            } else {
                approx_error(x, &select_columns(x, &SamplerSpec::new(method, l, seed))?)?
            };
            Ok((err, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let mut points = Vec::with_capacity(grid.len());
        for (li, &l) in grid.iter().enumerate() {
            let runs: Vec<(f64, f64)> = cells
                .iter()
                .zip(&results)
                .filter(|(c, _)| c.0 == mi && c.1 == li)
                .map(|(_, r)| *r)
                .collect();
            let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let k = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / k;
            let stderr = if errors.len() > 1 {
                (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
            } else {
                0.0
            };
            points.push(CurvePoint {
                columns: l,
                errors,
                mean,
                stderr,
                seconds: runs.iter().map(|r| r.1).sum::<f64>() / k,
            });
        }
        let delta_trace = match (method, grid.iter().max()) {
            (SamplerMethod::Oasis, Some(&l)) if l > 0 => {
                oasis_select(x, &OasisConfig::new(l, seeds[0]))?.delta_trace
            }
            _ => Vec::new(),
        };
        reports.push(ApproxReport {
            method,
            points,
            delta_trace,
        });
    }
    Ok(reports)
}

/// Reconstruction `D V` of the decomposition of `x`.
pub fn denoise(x: &DataMatrix, cfg: &SeedConfig) -> Result<DataMatrix> {
    Ok(reconstruct(&seed_decompose(x, cfg)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    Fixed,
    KMeans,
}

#[derive(Debug, Clone)]
pub struct OutlierReport {
    /// Number of nonzeros in every column of `V`.
    pub sparsity: Vec<usize>,
    /// Columns with sparsity above this are outliers.
    pub threshold: usize,
    pub is_outlier: Vec<bool>,
    pub mode: ThresholdMode,
    /// Means of the two sparsity clusters (inlier, outlier) in k-means mode.
    pub cluster_means: Option<(f64, f64)>,
    /// The sparsity levels do not split into two clusters more than 1 apart;
    /// no column is labeled an outlier.
    pub low_confidence: bool,
    pub decomposition: SeedDecomposition,
}

impl OutlierReport {
    /// `histogram[s]` counts the columns with sparsity `s`.
    pub fn histogram(&self) -> Vec<usize> {
        let max = self.sparsity.iter().copied().max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for &s in &self.sparsity {
            h[s] += 1;
        }
        h
    }

    pub fn outliers(&self) -> Vec<usize> {
        (0..self.is_outlier.len()).filter(|&j| self.is_outlier[j]).collect()
    }
}

/// Flags columns whose zero-diagonal codes are dense.
///
/// `cfg` must use the zero-diagonal variant and an error tolerance; a missing
/// `k_max` is set to `L`. With no `threshold`, a two-cluster k-means on the
/// sparsity levels picks one.
pub fn detect_outliers(
    x: &DataMatrix,
    cfg: &SeedConfig,
    threshold: Option<usize>,
) -> Result<OutlierReport> {
    if cfg.variant != Variant::ZeroDiag {
        return Err(SeedError::InvalidConfig(
            "outlier detection needs the zero-diagonal variant".into(),
        ));
    }
    let Some(eps) = cfg.stop.eps() else {
        return Err(SeedError::InvalidConfig(
            "outlier detection needs an error tolerance (eps)".into(),
        ));
    };
    let mut cfg = cfg.clone();
    cfg.stop = StoppingRule::new(Some(cfg.stop.k_max().unwrap_or(cfg.columns())), Some(eps))?;
    let decomposition = seed_decompose(x, &cfg)?;
    let sparsity = decomposition.sparsity();
    let max_s = sparsity.iter().copied().max().unwrap_or(0);
    let min_s = sparsity.iter().copied().min().unwrap_or(0);

    let (threshold, mode, cluster_means, low_confidence) = match threshold {
        Some(t) => (t, ThresholdMode::Fixed, None, false),
        None if min_s == max_s => (max_s, ThresholdMode::KMeans, None, true),
        None => {
            let values: Vec<f64> = sparsity.iter().map(|&s| s as f64).collect();
            let points = DataMatrix::from_column_major(1, values.len(), values.clone())?;
            let km = kmeans(&points, 2, cfg.sampler.seed, 10)?;
            let (c0, c1) = (km.centroids[0][0], km.centroids[1][0]);
            let high = usize::from(c1 > c0);
            let inlier_max = sparsity
                .iter()
                .zip(&km.labels)
                .filter(|(_, &l)| l != high)
                .map(|(&s, _)| s)
                .max()
                .unwrap_or(max_s);
            let means = if high == 1 { (c0, c1) } else { (c1, c0) };
            let low = (means.1 - means.0).abs() <= 1.0;
            let t = if low { max_s } else { inlier_max };
            (t, ThresholdMode::KMeans, Some(means), low)
        }
    };
    let is_outlier = sparsity.iter().map(|&s| s > threshold).collect();
    Ok(OutlierReport {
        sparsity,
        threshold,
        is_outlier,
        mode,
        cluster_means,
        low_confidence,
        decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_duplicated, gen_low_rank};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    fn set(v: Vec<usize>, n: usize) -> ColumnIndexSet {
        ColumnIndexSet::from_indices(v, n).unwrap()
    }

    #[test]
    fn spanning_selection_has_zero_error() {
        let x = gen_low_rank(10, 30, 3, 0.0, 1).unwrap();
        assert!(approx_error(&x, &set(vec![0, 1, 2], 30)).unwrap() < 1e-20);
        assert_eq!(approx_error(&x, &ColumnIndexSet::new()).unwrap(), 1.0);
    }

    #[test]
    fn orthonormal_accounting() {
        let q = gaussian(9, 6, 2).qr().q();
        let x = DataMatrix::from_dmatrix(q).unwrap();
        let e = approx_error(&x, &set(vec![4], 6)).unwrap();
        assert!((e - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn matches_svd_projection_oracle() {
        let x = gen_low_rank(12, 40, 5, 0.0, 3).unwrap();
        let s = set(vec![7, 19, 33], 40);
        let xs = x.select(&s);
        let svd = xs.svd(true, false);
        let u = svd.u.unwrap();
        let resid = x.as_dmatrix() - &u * u.tr_mul(x.as_dmatrix());
        let oracle = resid.norm_squared() / x.as_dmatrix().norm_squared();
        assert!((approx_error(&x, &s).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn superset_never_increases_error() {
        let x = DataMatrix::from_dmatrix(gaussian(15, 40, 4)).unwrap();
        let mut s = ColumnIndexSet::new();
        let mut prev = 1.0;
        for j in [3, 17, 8, 30, 1, 22] {
            s.push(j);
            let e = approx_error(&x, &s).unwrap();
            assert!(e <= prev + 1e-12);
            prev = e;
        }
    }

    #[test]
    fn oasis_curve_hits_zero_at_rank() {
        let x = gen_low_rank(30, 120, 6, 0.0, 5).unwrap();
        let seeds: Vec<u64> = (0..5).collect();
        let reports = error_curve(&x, &[SamplerMethod::Oasis, SamplerMethod::Random], &[0, 2, 4, 6], &seeds).unwrap();
        let oasis = &reports[0];
        assert_eq!(oasis.points[0].mean, 1.0);
        assert!(oasis.points[3].mean <= 1e-8);
        for w in oasis.points.windows(2) {
            assert!(w[1].mean <= w[0].mean + 1e-12);
        }
        assert_eq!(oasis.points[1].errors.len(), 1);
        assert_eq!(reports[1].points[1].errors.len(), 5);
        assert!(!oasis.delta_trace.is_empty());
        for p in reports.iter().flat_map(|r| &r.points) {
            assert!(p.errors.iter().all(|&e| (0.0..=1.0 + 1e-12).contains(&e)));
        }
    }

    #[test]
    fn random_sampling_misses_duplicates() {
        let x = gen_duplicated(20, 5, 40, 6).unwrap();
        let seeds: Vec<u64> = (0..20).collect();
        let r = error_curve(&x, &[SamplerMethod::Random], &[5], &seeds).unwrap();
        let failures = r[0].points[0].errors.iter().filter(|&&e| e > 1e-3).count();
        assert!(failures >= 18);
    }

    #[test]
    fn curve_needs_enough_seeds() {
        let x = gen_low_rank(5, 10, 2, 0.0, 0).unwrap();
        assert!(error_curve(&x, &[SamplerMethod::Random], &[2], &[0, 1]).is_err());
        assert!(error_curve(&x, &[SamplerMethod::Oasis], &[11], &[0]).is_err());
    }

    #[test]
    fn noiseless_denoise_is_passthrough() {
        let x = gen_low_rank(20, 60, 4, 0.0, 7).unwrap();
        let cfg = SeedConfig::new(10, StoppingRule::error(1e-9).unwrap(), Variant::Diagonal, 1);
        let y = denoise(&x, &cfg).unwrap();
        for (a, b) in x.columns().zip(y.columns()) {
            let r: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(r <= 1e-9);
        }
    }

    #[test]
    fn denoised_columns_use_few_atoms_and_stay_in_span() {
        let x = DataMatrix::from_dmatrix(gaussian(12, 50, 8)).unwrap();
        let cfg = SeedConfig::new(10, StoppingRule::new(Some(5), Some(0.1)).unwrap(), Variant::Diagonal, 2);
        let dec = seed_decompose(&x, &cfg).unwrap();
        assert!(dec.sparsity().iter().all(|&s| s <= 5));
        let y = denoise(&x, &cfg).unwrap();
        let combined = DataMatrix::from_dmatrix(
            DMatrix::from_columns(&[dec.dictionary.atoms().column_iter().map(|c| c.into_owned()).collect::<Vec<_>>(),
                y.as_dmatrix().column_iter().map(|c| c.into_owned()).collect()].concat()),
        )
        .unwrap();
        let atoms = set((0..10).collect(), combined.ncols());
        let p = least_squares_project(&combined, &atoms).unwrap();
        let rel = (p.as_dmatrix() - combined.as_dmatrix()).norm() / combined.frobenius_norm();
        assert!(rel <= 1e-8);
    }

    #[test]
    fn one_dimensional_data_has_no_outliers() {
        let x = gen_low_rank(8, 30, 1, 0.0, 9).unwrap();
        let cfg = SeedConfig::new(5, StoppingRule::error(1e-6).unwrap(), Variant::ZeroDiag, 0);
        let r = detect_outliers(&x, &cfg, None).unwrap();
        assert!(r.sparsity.iter().all(|&s| s <= 1));
        assert!(r.is_outlier.iter().all(|&o| !o));
        assert!(r.low_confidence);
    }

    #[test]
    fn fixed_threshold_labels_match() {
        let x = DataMatrix::from_dmatrix(gaussian(10, 40, 10)).unwrap();
        let cfg = SeedConfig::new(10, StoppingRule::error(0.4).unwrap(), Variant::ZeroDiag, 0);
        let r = detect_outliers(&x, &cfg, Some(3)).unwrap();
        assert_eq!(r.mode, ThresholdMode::Fixed);
        for (s, o) in r.sparsity.iter().zip(&r.is_outlier) {
            assert_eq!(*o, *s > 3);
        }
        assert_eq!(r.histogram().iter().sum::<usize>(), 40);
    }

    #[test]
    fn outlier_detection_requires_zero_diag_and_eps() {
        let x = DataMatrix::from_dmatrix(gaussian(5, 10, 11)).unwrap();
        let diag = SeedConfig::new(3, StoppingRule::error(0.1).unwrap(), Variant::Diagonal, 0);
        assert!(detect_outliers(&x, &diag, None).is_err());
        let sparse = SeedConfig::new(3, StoppingRule::sparse(2).unwrap(), Variant::ZeroDiag, 0);
        assert!(detect_outliers(&x, &sparse, None).is_err());
    }
}
