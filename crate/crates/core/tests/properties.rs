use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seed_core::applications::{approx_error, denoise, detect_outliers};
use seed_core::coclustering::{cocluster_graph, ncut_conventional, ncut_printed, BipartiteGraph};
use seed_core::io::{read_csv, read_seedbin, write_csv, write_seedbin};
use seed_core::linalg::{leading_singular_vectors, least_squares_project, PowerOptions};
use seed_core::oasis::{OasisConfig, OasisState, StepOutcome};
use seed_core::pipeline::{seed_decompose, SeedConfig, Variant};
use seed_core::samplers::{select_columns, ses_select, SamplerMethod, SamplerSpec};
use seed_core::sparse_coding::{omp, Dictionary, StoppingRule};
use seed_core::synth::{gen_low_rank, gen_union_of_subspaces, UoSSpec};
use seed_core::{ColumnIndexSet, DataMatrix};

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn svd_rank(a: &DMatrix<f64>, rel: f64) -> usize {
    let s = singular_values(a);
    s.iter().filter(|&&v| v > rel * s[0]).count()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, l: usize) -> ColumnIndexSet {
    ColumnIndexSet::from_indices(sample(rng, n, l).into_vec(), n).unwrap()
}

fn unit_dictionary(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Dictionary {
    let mut a = gaussian(rng, m, n);
    for mut c in a.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    Dictionary::new(a, (0..n).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_optimal(m in 3usize..20, n in 4usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DataMatrix::from_dmatrix(gaussian(&mut rng, m, n)).unwrap();
        let l = rng.random_range(1..=m.min(n));
        let s = random_subset(&mut rng, n, l);
        let p = least_squares_project(&x, &s).unwrap();
        let pp = least_squares_project(&p, &s).unwrap();
        let xn = x.frobenius_norm();
        prop_assert!((pp.as_dmatrix() - p.as_dmatrix()).norm() <= 1e-10 * xn);

        let best = (x.as_dmatrix() - p.as_dmatrix()).norm();
        let xs = x.select(&s);
        for _ in 0..5 {
            let b = gaussian(&mut rng, l, n);
            prop_assert!((x.as_dmatrix() - &xs * b).norm() >= best - 1e-10);
        }
    }

    #[test]
    fn leading_triplets_match_full_svd(m in 2usize..50, n in 2usize..50, count in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(&mut rng, m, n);
        let count = count.min(m.min(n));
        let t = leading_singular_vectors(&a, count, PowerOptions::default()).unwrap();
        let oracle = singular_values(&a);
        for k in 0..count {
            prop_assert!((t.values[k] - oracle[k]).abs() <= 1e-8 * oracle[k].max(oracle[0] * 1e-8));
        }
    }

    #[test]
    fn oasis_selects_independent_columns_and_error_never_grows(
        m in 6usize..30, n in 20usize..60, r in 2usize..12, seed in any::<u64>()
    ) {
        let r = r.min(m);
        let x = gen_low_rank(m, n, r, 1e-3, seed).unwrap();
        let steps = m.min(15);
        let mut state = OasisState::init(&x, &OasisConfig::new(steps, seed)).unwrap();
        let mut prev = approx_error(&x, state.selected()).unwrap();
        while state.selected().len() < steps {
            if let StepOutcome::Stopped { .. } = state.step(&x).unwrap() {
                break;
            }
            let xs = x.select(state.selected());
            let s = singular_values(&xs);
            prop_assert!(s[s.len() - 1] > 1e-8 * s[0]);
            let err = approx_error(&x, state.selected()).unwrap();
            prop_assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    #[test]
    fn oasis_recovers_exactly_low_rank_data(m in 8usize..40, n in 30usize..120, r in 1usize..8, seed in any::<u64>()) {
        let x = gen_low_rank(m, n, r, 0.0, seed).unwrap();
        let mut state = OasisState::init(&x, &OasisConfig::new(r, seed)).unwrap();
        while state.selected().len() < r {
            let selected = matches!(state.step(&x).unwrap(), StepOutcome::Selected { .. });
            prop_assert!(selected);
        }
        prop_assert!(approx_error(&x, state.selected()).unwrap().sqrt() <= 1e-8);
    }

    #[test]
    fn samplers_are_distinct_and_reproducible(n in 10usize..40, l in 1usize..10, seed in any::<u64>()) {
        let x = gen_low_rank(12, n, 8, 0.05, seed).unwrap();
        for method in [SamplerMethod::Oasis, SamplerMethod::Random, SamplerMethod::Ses, SamplerMethod::SesGreedy, SamplerMethod::Leverage] {
            let spec = SamplerSpec::new(method, l, seed);
            let a = select_columns(&x, &spec).unwrap();
            let b = select_columns(&x, &spec).unwrap();
            prop_assert_eq!(&a, &b);
            let mut v = a.as_slice().to_vec();
            v.sort_unstable();
            v.dedup();
            prop_assert_eq!(v.len(), a.len());
            prop_assert!(v.iter().all(|&j| j < n));
        }
    }

    #[test]
    fn ses_returns_independent_columns(m in 5usize..20, r in 1usize..6, extra in 0usize..6, seed in any::<u64>()) {
        let r = r.min(m);
        let x = gen_low_rank(m, 50, r, 0.0, seed).unwrap();
        let set = ses_select(&x, r + extra, seed, false).unwrap();
        prop_assert!(set.len() <= r);
        let s = singular_values(&x.select(&set));
        prop_assert!(s[s.len() - 1] > 1e-8 * s[0]);
    }

    #[test]
    fn omp_residuals_shrink_and_end_orthogonal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dict = unit_dictionary(&mut rng, 15, 40);
        let x: Vec<f64> = (0..15).map(|_| rng.sample(StandardNormal)).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let code = omp(&x, &dict, &StoppingRule::sparse(k).unwrap()).unwrap();
            prop_assert!(code.residual_norm <= prev);
            prev = code.residual_norm;
            let mut r = x.clone();
            for (&a, c) in code.support.iter().zip(&code.coeffs) {
                for (ri, di) in r.iter_mut().zip(dict.atom(a)) {
                    *ri -= c * di;
                }
            }
            for &a in &code.support {
                let ip: f64 = r.iter().zip(dict.atom(a)).map(|(p, q)| p * q).sum();
                prop_assert!(ip.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn decompositions_are_well_formed_and_deterministic(
        n in 20usize..60, l in 2usize..10, kmax in 1usize..4, zero_diag in any::<bool>(), seed in any::<u64>()
    ) {
        let x = gen_low_rank(10, n, 6, 0.1, seed).unwrap();
        let variant = if zero_diag { Variant::ZeroDiag } else { Variant::Diagonal };
        let cfg = SeedConfig::new(l, StoppingRule::new(Some(kmax), Some(1e-6)).unwrap(), variant, seed);
        let a = seed_decompose(&x, &cfg).unwrap();
        let b = seed_decompose(&x, &cfg).unwrap();
        a.check_structure(Some(&cfg.stop)).unwrap();
        prop_assert_eq!(&a, &b);
        if !zero_diag {
            let l = a.natoms();
            prop_assert!(a.nnz() <= l + (n - l) * kmax);
        }
    }

    #[test]
    fn approx_error_shrinks_on_supersets(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DataMatrix::from_dmatrix(gaussian(&mut rng, 12, 30)).unwrap();
        let l = rng.random_range(1..=12);
        let big = sample(&mut rng, 30, l).into_vec();
        let small: Vec<usize> = big[..rng.random_range(1..=big.len())].to_vec();
        let e_big = approx_error(&x, &ColumnIndexSet::from_indices(big, 30).unwrap()).unwrap();
        let e_small = approx_error(&x, &ColumnIndexSet::from_indices(small, 30).unwrap()).unwrap();
        prop_assert!(e_small >= e_big - 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e_big));
    }

    #[test]
    fn denoised_columns_lie_in_the_dictionary_span(seed in any::<u64>()) {
        let x = gen_low_rank(15, 40, 8, 0.2, seed).unwrap();
        let cfg = SeedConfig::new(6, StoppingRule::sparse(3).unwrap(), Variant::Diagonal, seed);
        let dec = seed_decompose(&x, &cfg).unwrap();
        let clean = denoise(&x, &cfg).unwrap();
        let q = dec.dictionary.atoms().clone().qr().q();
        let c = clean.as_dmatrix();
        let resid = c - &q * (q.transpose() * c);
        prop_assert!(resid.norm() <= 1e-8 * c.norm());
    }

    #[test]
    fn ncut_follows_label_permutations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(8, 10, |_, _| rng.random_range(0.0..1.0));
        let g = BipartiteGraph::from_dense(w).unwrap();
        let rows: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let cols: Vec<usize> = (0..10).map(|j| j % 3).collect();
        let perm = sample(&mut rng, 3, 3).into_vec();
        let prow: Vec<usize> = rows.iter().map(|&c| perm[c]).collect();
        let pcol: Vec<usize> = cols.iter().map(|&c| perm[c]).collect();
        for f in [ncut_printed, ncut_conventional] {
            let a = f(&g, &rows, &cols, 3).unwrap();
            let b = f(&g, &prow, &pcol, 3).unwrap();
            for c in 0..3 {
                prop_assert!((a.per_class[c] - b.per_class[perm[c]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cocluster_labels_ignore_weight_scale(seed in any::<u64>(), p in 0i32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Three noisy blocks.
        let w = DMatrix::from_fn(9, 30, |i, j| {
            let base = if i / 3 == j / 10 { 1.0 } else { 0.05 };
            base * rng.random_range(0.5..1.5)
        });
        let scale = 4f64.powi(p - 1);
        let a = cocluster_graph(&BipartiteGraph::from_dense(w.clone()).unwrap(), 3, seed).unwrap();
        let b = cocluster_graph(&BipartiteGraph::from_dense(w * scale).unwrap(), 3, seed).unwrap();
        prop_assert_eq!(a.row_labels, b.row_labels);
        prop_assert_eq!(a.col_labels, b.col_labels);
    }

    #[test]
    fn synthetic_rank_matches_analytic_rank(
        m in 30usize..60,
        dims in proptest::collection::vec(2usize..7, 1..4),
        extra in 0usize..10,
        outliers in 0usize..6,
        seed in any::<u64>()
    ) {
        let spec = UoSSpec {
            ambient_dim: m,
            points_per_subspace: dims.iter().map(|&k| k + extra).collect(),
            subspace_dims: dims,
            overlaps: Vec::new(),
            n_outliers: outliers,
            noise_sigma: 0.0,
            seed,
        };
        let a = gen_union_of_subspaces(&spec).unwrap();
        let b = gen_union_of_subspaces(&spec).unwrap();
        prop_assert_eq!(&a.data, &b.data);
        prop_assert_eq!(svd_rank(a.data.as_dmatrix(), 1e-8), spec.analytic_rank().unwrap());
        prop_assert_eq!(a.rank, spec.analytic_rank().unwrap());
    }

    #[test]
    fn matrix_files_round_trip_exactly(
        m in 1usize..6,
        n in 1usize..6,
        values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 36),
        points in any::<bool>()
    ) {
        let x = DataMatrix::from_column_major(m, n, values[..m * n].to_vec()).unwrap();
        let mut bin = Vec::new();
        write_seedbin(&mut bin, &x).unwrap();
        let y = read_seedbin(bin.as_slice()).unwrap();
        prop_assert!(x.as_slice().iter().zip(y.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut text = Vec::new();
        write_csv(&mut text, &x, points).unwrap();
        prop_assert_eq!(read_csv(text.as_slice(), points).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outlier_labels_follow_column_permutations(seed in any::<u64>()) {
        let spec = UoSSpec {
            ambient_dim: 60,
            subspace_dims: vec![4, 4],
            points_per_subspace: vec![60, 60],
            overlaps: Vec::new(),
            n_outliers: 10,
            // Mild noise makes the data full rank, so every subspace keeps spare atoms.
            noise_sigma: 0.01,
            seed,
        };
        let data = gen_union_of_subspaces(&spec).unwrap();
        let n = data.data.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let perm = sample(&mut rng, n, n).into_vec();
        let cols: Vec<Vec<f64>> = perm.iter().map(|&j| data.data.column(j).to_vec()).collect();
        let shuffled = DataMatrix::from_columns(&cols).unwrap();

        let cfg = SeedConfig::new(40, StoppingRule::error(0.3).unwrap(), Variant::ZeroDiag, seed);
        let a = detect_outliers(&data.data, &cfg, None).unwrap();
        let b = detect_outliers(&shuffled, &cfg, None).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            prop_assert_eq!(b.is_outlier[new], a.is_outlier[old]);
        }
    }
}
