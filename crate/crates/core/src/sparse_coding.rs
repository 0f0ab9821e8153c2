//! Orthogonal matching pursuit: a reference implementation that carries the
//! residual vector, and a batch implementation that works from the Gram matrix
//! and tracks the residual norm by recursion. Both share one output contract.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, SeedError};
use crate::linalg::ProgressiveCholesky;
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};

/// Correlations at or below this fraction of `‖x‖` end the pursuit.
pub const CORRELATION_FLOOR: f64 = 1e-12;
/// Allowed deviation of an atom norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Unit-norm atoms together with the data columns they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    source_indices: Vec<usize>,
}

impl Dictionary {
    pub fn new(atoms: DMatrix<f64>, source_indices: Vec<usize>) -> Result<Self> {
        if atoms.ncols() != source_indices.len() {
            return Err(SeedError::InvalidInput(format!(
                "{} atoms but {} source indices",
                atoms.ncols(),
                source_indices.len()
            )));
        }
        if atoms.nrows() == 0 {
            return Err(SeedError::InvalidInput("atoms must have at least one row".into()));
        }
        for (i, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
                return Err(SeedError::InvalidInput(format!(
                    "atom {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            atoms,
            source_indices,
        })
    }

    /// Normalizes the selected columns of `x`. Returns the dictionary and the
    /// raw column norms. A zero column is a degenerate-column error.
    pub fn from_selection(x: &DataMatrix, set: &ColumnIndexSet) -> Result<(Self, Vec<f64>)> {
        let mut atoms = x.select(set);
        let mut alpha = Vec::with_capacity(set.len());
        for (k, &j) in set.iter().enumerate() {
            let norm = atoms.column(k).norm();
            if norm == 0.0 {
                return Err(SeedError::Degenerate(format!(
                    "selected column {j} is zero and cannot be normalized"
                )));
            }
            atoms.column_mut(k).unscale_mut(norm);
            alpha.push(norm);
        }
        let dict = Self::new(atoms, set.as_slice().to_vec())?;
        Ok((dict, alpha))
    }

    /// Signal dimension `m`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn natoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.atoms.as_slice()[i * m..(i + 1) * m]
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    /// Original column index of every atom.
    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    /// `DᵀD`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.atoms.tr_mul(&self.atoms)
    }
}

/// Sparse coefficient vector; `support` is in selection order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
    /// Exact `‖x − D_Λ v_Λ‖₂` at termination.
    pub residual_norm: f64,
}

impl SparseVector {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Coefficient of `atom`, zero when it is not in the support.
    pub fn coeff(&self, atom: usize) -> f64 {
        self.support
            .iter()
            .position(|&a| a == atom)
            .map_or(0.0, |p| self.coeffs[p])
    }
}

/// Column-sparse `L × N` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub natoms: usize,
    pub columns: Vec<SparseVector>,
}

impl SparseCode {
    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(SparseVector::sparsity).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.natoms, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for (&a, &c) in col.support.iter().zip(&col.coeffs) {
                v[(a, j)] = c;
            }
        }
        v
    }

    /// `D · V`, one column per code.
    pub fn reconstruct(&self, dict: &Dictionary) -> DMatrix<f64> {
        let m = dict.dim();
        let mut out = DMatrix::zeros(m, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            let mut dst = out.column_mut(j);
            for (&a, &c) in col.support.iter().zip(&col.coeffs) {
                for (o, d) in dst.iter_mut().zip(dict.atom(a)) {
                    *o += c * d;
                }
            }
        }
        out
    }
}

/// Termination: residual `‖r‖ ≤ eps`, support size `k_max`, or both (first hit wins).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    k_max: Option<usize>,
    eps: Option<f64>,
}

impl StoppingRule {
    pub fn new(k_max: Option<usize>, eps: Option<f64>) -> Result<Self> {
        if k_max.is_none() && eps.is_none() {
            return Err(SeedError::InvalidConfig(
                "a stopping rule needs k_max, eps, or both".into(),
            ));
        }
        if k_max == Some(0) {
            return Err(SeedError::InvalidConfig("k_max must be positive".into()));
        }
        if let Some(e) = eps {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(SeedError::InvalidConfig(format!(
                    "eps must be finite and non-negative, got {e}"
                )));
            }
        }
        Ok(Self { k_max, eps })
    }

    pub fn sparse(k_max: usize) -> Result<Self> {
        Self::new(Some(k_max), None)
    }

    pub fn error(eps: f64) -> Result<Self> {
        Self::new(None, Some(eps))
    }

    pub fn k_max(&self) -> Option<usize> {
        self.k_max
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    fn done(&self, support: usize, residual_norm: f64) -> bool {
        self.k_max.is_some_and(|k| support >= k) || self.eps.is_some_and(|e| residual_norm <= e)
    }
}

/// Index of the largest `|values[j]|` among allowed atoms, smallest index on ties.
fn argmax_abs(values: &[f64], taken: &[bool], exclude: Option<usize>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values.iter().enumerate() {
        if taken[j] || exclude == Some(j) {
            continue;
        }
        let a = v.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((j, a));
        }
    }
    best
}

fn check_dim(len: usize, dict: &Dictionary) -> Result<()> {
    if len != dict.dim() {
        return Err(SeedError::InvalidInput(format!(
            "signal has {len} entries but atoms have {}",
            dict.dim()
        )));
    }
    Ok(())
}

fn residual_of(x: &[f64], dict: &Dictionary, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    for (&a, &c) in support.iter().zip(coeffs) {
        r.iter_mut().zip(dict.atom(a)).for_each(|(ri, d)| *ri -= c * d);
    }
    r
}

/// Reference OMP on a single signal.
pub fn omp(x: &[f64], dict: &Dictionary, stop: &StoppingRule) -> Result<SparseVector> {
    check_dim(x.len(), dict)?;
    omp_reference(x, dict, stop, None, None)
}

/// Reference pursuit. `exclude` removes one atom from candidacy; `trace`
/// receives `‖r‖` before the first and after every selection.
fn omp_reference(
    x: &[f64],
    dict: &Dictionary,
    stop: &StoppingRule,
    exclude: Option<usize>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SparseVector> {
    let x_norm = dot(x, x).sqrt();
    if x_norm == 0.0 {
        return Ok(SparseVector::default());
    }
    let natoms = dict.natoms();
    let mut taken = vec![false; natoms];
    let mut support = Vec::new();
    let mut coeffs = Vec::new();
    let mut chol = ProgressiveCholesky::new();
    let mut r = x.to_vec();
    let mut r_norm = x_norm;
    if let Some(t) = trace.as_deref_mut() {
        t.push(r_norm);
    }
    while !stop.done(support.len(), r_norm) {
        let corr: Vec<f64> = (0..natoms).map(|j| dot(dict.atom(j), &r)).collect();
        let Some((j, c)) = argmax_abs(&corr, &taken, exclude) else {
            break;
        };
        if c <= CORRELATION_FLOOR * x_norm {
            break;
        }
        let cross: Vec<f64> = support.iter().map(|&i| dot(dict.atom(i), dict.atom(j))).collect();
        let diag = dot(dict.atom(j), dict.atom(j));
        chol.push(&cross, diag)
            .map_err(|pivot| SeedError::NonPositivePivot { atom: j, pivot })?;
        taken[j] = true;
        support.push(j);
        let rhs: Vec<f64> = support.iter().map(|&i| dot(dict.atom(i), x)).collect();
        coeffs = chol.solve(&rhs);
        r = residual_of(x, dict, &support, &coeffs);
        r_norm = dot(&r, &r).sqrt();
        if let Some(t) = trace.as_deref_mut() {
            t.push(r_norm);
        }
    }
    Ok(SparseVector {
        support,
        coeffs,
        residual_norm: r_norm,
    })
}

/// Gram-based pursuit for one signal given `α⁰ = Dᵀx`.
fn omp_gram(
    x: &[f64],
    alpha0: &[f64],
    gram: &DMatrix<f64>,
    dict: &Dictionary,
    stop: &StoppingRule,
    exclude: Option<usize>,
) -> Result<SparseVector> {
    let x_sq = dot(x, x);
    if x_sq == 0.0 {
        return Ok(SparseVector::default());
    }
    let x_norm = x_sq.sqrt();
    let natoms = alpha0.len();
    let mut taken = vec![false; natoms];
    let mut support: Vec<usize> = Vec::new();
    let mut gamma: Vec<f64> = Vec::new();
    let mut chol = ProgressiveCholesky::new();
    let mut alpha = alpha0.to_vec();
    let mut err_sq = x_sq;
    let mut delta_prev = 0.0;
    while !stop.done(support.len(), err_sq.max(0.0).sqrt()) {
        let Some((j, c)) = argmax_abs(&alpha, &taken, exclude) else {
            break;
        };
        if c <= CORRELATION_FLOOR * x_norm {
            break;
        }
        let cross: Vec<f64> = support.iter().map(|&i| gram[(i, j)]).collect();
        chol.push(&cross, gram[(j, j)])
            .map_err(|pivot| SeedError::NonPositivePivot { atom: j, pivot })?;
        taken[j] = true;
        support.push(j);
        let rhs: Vec<f64> = support.iter().map(|&i| alpha0[i]).collect();
        gamma = chol.solve(&rhs);
        // β = G_Λ γ; the correlations with the new residual are α⁰ − β.
        let mut beta = vec![0.0; natoms];
        for (&i, &g) in support.iter().zip(&gamma) {
            for (b, gv) in beta.iter_mut().zip(gram.column(i).iter()) {
                *b += g * gv;
            }
        }
        for ((a, a0), b) in alpha.iter_mut().zip(alpha0).zip(&beta) {
            *a = a0 - b;
        }
        let delta: f64 = support.iter().zip(&gamma).map(|(&i, g)| g * beta[i]).sum();
        err_sq = err_sq - delta + delta_prev;
        delta_prev = delta;
    }
    let r = residual_of(x, dict, &support, &gamma);
    Ok(SparseVector {
        support,
        coeffs: gamma,
        residual_norm: dot(&r, &r).sqrt(),
    })
}

fn batch_with<F>(x: &DataMatrix, dict: &Dictionary, stop: &StoppingRule, exclude: F) -> Result<SparseCode>
where
    F: Fn(usize) -> Option<usize> + Sync,
{
    check_dim(x.nrows(), dict)?;
    let gram = dict.gram();
    let correlations = dict.atoms().tr_mul(x.as_dmatrix());
    let natoms = dict.natoms();
    let columns = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let alpha0 = &correlations.as_slice()[j * natoms..(j + 1) * natoms];
            omp_gram(x.column(j), alpha0, &gram, dict, stop, exclude(j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseCode { natoms, columns })
}

/// Batch OMP over every column of `x`, parallel across columns.
pub fn batch_omp(x: &DataMatrix, dict: &Dictionary, stop: &StoppingRule) -> Result<SparseCode> {
    batch_with(x, dict, stop, |_| None)
}

/// Batch OMP where signal `i` may not use atom `i`. Column `i` of `xs` must be
/// the data column behind atom `i`.
pub fn omp_zero_diag(xs: &DataMatrix, dict: &Dictionary, stop: &StoppingRule) -> Result<SparseCode> {
    if xs.ncols() != dict.natoms() {
        return Err(SeedError::InvalidInput(format!(
            "{} signals for {} atoms; zero-diagonal coding pairs them one to one",
            xs.ncols(),
            dict.natoms()
        )));
    }
    batch_with(xs, dict, stop, Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    fn unit_dict(m: usize, l: usize, seed: u64) -> Dictionary {
        let mut a = gaussian(m, l, seed);
        for mut c in a.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        Dictionary::new(a, (0..l).collect()).unwrap()
    }

    fn combo(dict: &Dictionary, terms: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; dict.dim()];
        for &(a, c) in terms {
            x.iter_mut().zip(dict.atom(a)).for_each(|(xi, d)| *xi += c * d);
        }
        x
    }

    fn data(a: DMatrix<f64>) -> DataMatrix {
        DataMatrix::from_dmatrix(a).unwrap()
    }

    fn assert_same(a: &SparseVector, b: &SparseVector) {
        assert_eq!(a.support, b.support);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert!((a.residual_norm - b.residual_norm).abs() < 1e-8);
    }

    #[test]
    fn rule_needs_a_criterion() {
        assert!(StoppingRule::new(None, None).is_err());
        assert!(StoppingRule::new(Some(0), None).is_err());
        assert!(StoppingRule::new(None, Some(-1.0)).is_err());
        assert!(StoppingRule::new(Some(3), Some(0.1)).is_ok());
    }

    #[test]
    fn dictionary_rejects_non_unit_atoms() {
        assert!(Dictionary::new(DMatrix::from_element(2, 1, 1.0), vec![0]).is_err());
        let x = data(DMatrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]));
        let set = ColumnIndexSet::from_indices(vec![0], 2).unwrap();
        let (d, alpha) = Dictionary::from_selection(&x, &set).unwrap();
        assert_eq!(alpha, vec![5.0]);
        assert_eq!(d.atom(0), &[0.6, 0.8]);
        let zero = ColumnIndexSet::from_indices(vec![1], 2).unwrap();
        assert!(matches!(Dictionary::from_selection(&x, &zero), Err(SeedError::Degenerate(_))));
    }

    #[test]
    fn atom_is_recovered_exactly() {
        let d = unit_dict(8, 12, 1);
        let v = omp(d.atom(5), &d, &StoppingRule::error(1e-10).unwrap()).unwrap();
        assert_eq!(v.support, vec![5]);
        assert!((v.coeffs[0] - 1.0).abs() < 1e-12);
        assert!(v.residual_norm < 1e-12);
    }

    #[test]
    fn zero_signal_has_empty_code() {
        let d = unit_dict(4, 6, 2);
        let v = omp(&[0.0; 4], &d, &StoppingRule::sparse(3).unwrap()).unwrap();
        assert!(v.support.is_empty());
        assert_eq!(v.residual_norm, 0.0);
    }

    #[test]
    fn orthogonal_signal_selects_nothing() {
        let mut a = gaussian(5, 4, 3);
        a.row_mut(4).fill(0.0);
        for mut c in a.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        let d = Dictionary::new(a, (0..4).collect()).unwrap();
        let x = [0.0, 0.0, 0.0, 0.0, 2.0];
        let v = omp(&x, &d, &StoppingRule::error(3.0).unwrap()).unwrap();
        assert!(v.support.is_empty());
        let v = omp(&x, &d, &StoppingRule::sparse(2).unwrap()).unwrap();
        assert!(v.support.is_empty());
        assert!((v.residual_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_three_subset_search() {
        let d = unit_dict(10, 20, 4);
        let x = combo(&d, &[(3, 2.0), (7, -1.0), (12, 0.5)]);
        let v = omp(&x, &d, &StoppingRule::sparse(3).unwrap()).unwrap();

        // Oracle: least squares over every 3-subset, keep the smallest residual.
        let xv = nalgebra::DVector::from_column_slice(&x);
        let mut best = (f64::INFINITY, vec![], vec![]);
        for a in 0..20 {
            for b in a + 1..20 {
                for c in b + 1..20 {
                    let sub = d.atoms().select_columns(&[a, b, c]);
                    let coef = sub.clone().svd(true, true).solve(&xv, 1e-14).unwrap();
                    let res = (&sub * &coef - &xv).norm();
                    if res < best.0 {
                        best = (res, vec![a, b, c], coef.iter().copied().collect());
                    }
                }
            }
        }
        assert!(best.0 < 1e-10);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| v.support[i]);
        let sorted: Vec<usize> = order.iter().map(|&i| v.support[i]).collect();
        assert_eq!(sorted, best.1);
        for (k, &i) in order.iter().enumerate() {
            assert!((v.coeffs[i] - best.2[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_decreases_and_is_orthogonal_to_support() {
        let d = unit_dict(12, 30, 5);
        let x: Vec<f64> = gaussian(12, 1, 6).iter().copied().collect();
        let mut trace = Vec::new();
        let v = omp_reference(&x, &d, &StoppingRule::sparse(10).unwrap(), None, Some(&mut trace)).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let r = residual_of(&x, &d, &v.support, &v.coeffs);
        for &j in &v.support {
            assert!(dot(d.atom(j), &r).abs() <= 1e-8);
        }
    }

    #[test]
    fn batch_of_one_is_reference() {
        let d = unit_dict(9, 25, 7);
        let x = gaussian(9, 1, 8);
        let stop = StoppingRule::new(Some(6), Some(0.05)).unwrap();
        let code = batch_omp(&data(x.clone()), &d, &stop).unwrap();
        assert_same(&code.columns[0], &omp(x.as_slice(), &d, &stop).unwrap());
    }

    #[test]
    fn batch_matches_reference_on_many_signals() {
        let d = unit_dict(15, 40, 9);
        let x = data(gaussian(15, 100, 10));
        let stop = StoppingRule::sparse(5).unwrap();
        let code = batch_omp(&x, &d, &stop).unwrap();
        for (j, col) in code.columns.iter().enumerate() {
            assert_same(col, &omp(x.column(j), &d, &stop).unwrap());
        }

        // 600 more signals under mixed rules.
        let mut total = 0;
        for (seed, stop) in [
            (11, StoppingRule::error(0.3).unwrap()),
            (12, StoppingRule::new(Some(4), Some(0.5)).unwrap()),
            (13, StoppingRule::sparse(12).unwrap()),
        ] {
            let x = data(gaussian(15, 200, seed));
            let code = batch_omp(&x, &d, &stop).unwrap();
            for (j, col) in code.columns.iter().enumerate() {
                assert_same(col, &omp(x.column(j), &d, &stop).unwrap());
                total += 1;
            }
        }
        assert!(total >= 500);
    }

    #[test]
    fn error_rule_contract() {
        let d = unit_dict(10, 30, 14);
        let mut x = gaussian(10, 80, 15);
        for mut c in x.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        let code = batch_omp(&data(x), &d, &StoppingRule::error(0.2).unwrap()).unwrap();
        for col in &code.columns {
            assert!(col.residual_norm <= 0.2 + 1e-10 || col.sparsity() == 30);
        }
    }

    #[test]
    fn zero_diag_duplicate_pair() {
        let base = gaussian(6, 3, 16);
        let cols = vec![
            base.column(0).iter().copied().collect::<Vec<_>>(),
            base.column(0).iter().map(|v| 2.0 * v).collect(),
            base.column(1).iter().copied().collect(),
            base.column(2).iter().copied().collect(),
        ];
        let xs = DataMatrix::from_columns(&cols).unwrap();
        let all = ColumnIndexSet::from_indices(vec![0, 1, 2, 3], 4).unwrap();
        let (d, alpha) = Dictionary::from_selection(&xs, &all).unwrap();
        let code = omp_zero_diag(&xs, &d, &StoppingRule::error(1e-9).unwrap()).unwrap();
        assert_eq!(code.columns[0].support, vec![1]);
        assert!((code.columns[0].coeffs[0] - alpha[0]).abs() < 1e-10);
        assert!(code.columns[0].residual_norm < 1e-10);
        assert_eq!(code.columns[1].support, vec![0]);
        assert!((code.columns[1].coeffs[0] - alpha[1]).abs() < 1e-10);
    }

    #[test]
    fn zero_diag_isolated_atom_stops_at_floor() {
        let mut a = gaussian(6, 4, 17);
        a.row_mut(5).fill(0.0);
        a.column_mut(3).fill(0.0);
        a[(5, 3)] = 1.5;
        let xs = data(a);
        let all = ColumnIndexSet::from_indices(vec![0, 1, 2, 3], 4).unwrap();
        let (d, _) = Dictionary::from_selection(&xs, &all).unwrap();
        let code = omp_zero_diag(&xs, &d, &StoppingRule::error(0.1).unwrap()).unwrap();
        assert!(code.columns[3].support.is_empty());
        assert!((code.columns[3].residual_norm - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_diag_stays_in_spanning_pair() {
        let basis = gaussian(8, 2, 18);
        let xs = data(&basis * gaussian(2, 5, 19));
        let all = ColumnIndexSet::from_indices((0..5).collect(), 5).unwrap();
        let (d, _) = Dictionary::from_selection(&xs, &all).unwrap();
        let code = omp_zero_diag(&xs, &d, &StoppingRule::error(1e-9).unwrap()).unwrap();
        for (i, col) in code.columns.iter().enumerate() {
            assert!(!col.support.contains(&i));
            assert!(col.sparsity() <= 2);
            assert!(col.residual_norm < 1e-8);
        }
    }

    #[test]
    fn near_duplicate_atoms_report_pivot() {
        let d0 = [1.0, 0.0, 0.0];
        let mut d1 = [1.0, 1e-9, 0.0];
        let n = dot(&d1, &d1).sqrt();
        d1.iter_mut().for_each(|v| *v /= n);
        let d = Dictionary::new(DMatrix::from_column_slice(3, 2, &[d0, d1].concat()), vec![0, 1]).unwrap();
        let x = data(DMatrix::from_column_slice(3, 1, &[0.3, 1.0, 0.2]));
        let err = batch_omp(&x, &d, &StoppingRule::sparse(2).unwrap()).unwrap_err();
        assert!(matches!(err, SeedError::NonPositivePivot { .. }));
    }

    #[test]
    fn exact_recovery_on_independent_subspaces() {
        // Two independent 3-dim subspaces, four atoms from each.
        let m = 20;
        let u1 = gaussian(m, 3, 20);
        let u2 = gaussian(m, 3, 21);
        let atoms = DMatrix::from_columns(
            &[(&u1 * gaussian(3, 4, 22)).column_iter().map(|c| c.normalize()).collect::<Vec<_>>(),
              (&u2 * gaussian(3, 4, 23)).column_iter().map(|c| c.normalize()).collect::<Vec<_>>()]
                .concat(),
        );
        let d = Dictionary::new(atoms, (0..8).collect()).unwrap();
        let stop = StoppingRule::error(1e-6).unwrap();
        for trial in 0..100u64 {
            let own = (trial % 2) as usize;
            let basis = if own == 0 { &u1 } else { &u2 };
            let x = basis * gaussian(3, 1, 100 + trial);
            let v = omp(x.as_slice(), &d, &stop).unwrap();
            assert!(v.residual_norm <= 1e-6);
            assert!(v.support.iter().all(|&a| a / 4 == own), "trial {trial}: {:?}", v.support);
        }
    }

    #[test]
    fn sparse_code_dense_and_reconstruct() {
        let d = unit_dict(5, 6, 24);
        let x = data(gaussian(5, 7, 25));
        let code = batch_omp(&x, &d, &StoppingRule::sparse(3).unwrap()).unwrap();
        let dense = code.to_dense();
        let rec = code.reconstruct(&d);
        assert!((d.atoms() * &dense - &rec).norm() < 1e-12);
        assert_eq!(code.nnz(), dense.iter().filter(|v| **v != 0.0).count());
        for (j, col) in code.columns.iter().enumerate() {
            let r = (x.as_dmatrix().column(j) - rec.column(j)).norm();
            assert!((r - col.residual_norm).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]
            #[test]
            fn batch_and_reference_agree(
                m in 3usize..12,
                l in 2usize..25,
                n in 1usize..15,
                k in 1usize..6,
                eps in proptest::option::of(0.0f64..1.0),
                seed in 0u64..10_000,
            ) {
                let d = unit_dict(m, l, seed);
                let x = data(gaussian(m, n, seed + 1));
                let stop = StoppingRule::new(Some(k), eps).unwrap();
                let code = batch_omp(&x, &d, &stop).unwrap();
                for (j, col) in code.columns.iter().enumerate() {
                    let reference = omp(x.column(j), &d, &stop).unwrap();
                    prop_assert_eq!(&col.support, &reference.support);
                    for (a, b) in col.coeffs.iter().zip(&reference.coeffs) {
                        prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
                    }
                    prop_assert!(col.sparsity() <= k);
                    let mut s = col.support.clone();
                    s.sort();
                    s.dedup();
                    prop_assert_eq!(s.len(), col.sparsity());
                }
            }
        }
    }
}
