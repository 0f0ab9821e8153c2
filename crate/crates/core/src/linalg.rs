//! Dense linear-algebra substrate: regularized least squares, progressive
//! Cholesky factors, and deflated power iteration for leading singular triplets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ConvergenceFailure, Result, SeedError};
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};

/// Relative ridge added to the normal equations of every least-squares solve.
pub const RIDGE_SCALE: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 2;
/// Relative size below which a squared Cholesky pivot is treated as zero.
pub const PIVOT_FLOOR: f64 = 1e-14;

/// Coefficients `B` minimizing `‖X − X_S B‖_F`, via Cholesky on `X_SᵀX_S + λI`
/// with `λ = 1e-12 · trace(X_SᵀX_S) / |S|`.
pub fn projection_coefficients(x: &DataMatrix, set: &ColumnIndexSet) -> Result<DMatrix<f64>> {
    if set.is_empty() {
        return Err(SeedError::InvalidInput("empty column set".into()));
    }
    least_squares_solve(&x.select(set), x.as_dmatrix())
}

/// Regularized least-squares coefficients of `target` over the columns of `basis`.
pub fn least_squares_solve(basis: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = basis.ncols();
    let mut gram = basis.tr_mul(basis);
    let unregularized = gram.clone();
    let trace = gram.trace();
    if trace <= 0.0 {
        return Err(SeedError::Degenerate("selected columns are all zero".into()));
    }
    let lambda = RIDGE_SCALE * trace / k as f64;
    for i in 0..k {
        gram[(i, i)] += lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| SeedError::Degenerate("regularized Gram matrix not positive definite".into()))?;
    let rhs = basis.tr_mul(target);
    let mut coeffs = chol.solve(&rhs);
    // Iterative refinement removes the ridge bias on well-posed directions.
    for _ in 0..REFINEMENT_STEPS {
        let correction = chol.solve(&(&rhs - &unregularized * &coeffs));
        coeffs += correction;
    }
    Ok(coeffs)
}

/// Orthogonal projection `P_S(X) = X_S X_S⁺ X` of every column onto `span(X_S)`.
pub fn least_squares_project(x: &DataMatrix, set: &ColumnIndexSet) -> Result<DataMatrix> {
    let coeffs = projection_coefficients(x, set)?;
    DataMatrix::from_dmatrix(x.select(set) * coeffs)
}

/// Lower-triangular factor of a Gram matrix grown one row/column at a time.
#[derive(Debug, Clone, Default)]
pub struct ProgressiveCholesky {
    /// Row-major packed lower triangle: row `i` holds `i + 1` entries.
    rows: Vec<Vec<f64>>,
}

impl ProgressiveCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Extends the factor with a new atom whose inner products with the
    /// existing atoms are `cross` and whose squared norm is `diag`.
    ///
    /// Fails with the squared pivot when it is not positive, counting values
    /// within rounding of zero (`≤ PIVOT_FLOOR · diag`) as zero.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> std::result::Result<(), f64> {
        debug_assert_eq!(cross.len(), self.dim());
        let w = self.forward(cross);
        let pivot_sq = diag - dot(&w, &w);
        if !(pivot_sq > PIVOT_FLOOR * diag.abs()) {
            return Err(pivot_sq);
        }
        let mut row = w;
        row.push(pivot_sq.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s = b[i] - dot(&row[..i], &y);
            y.push(s / row[i]);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let mut x = y.to_vec();
        for i in (0..k).rev() {
            x[i] /= self.rows[i][i];
            let xi = x[i];
            for (j, xj) in x.iter_mut().enumerate().take(i) {
                *xj -= self.rows[i][j] * xi;
            }
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

/// Top singular triplets; column `t` of `left`/`right` pairs with `values[t]`.
#[derive(Debug, Clone)]
pub struct SingularTriplets {
    pub values: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    /// Accept a triplet once `‖Aᵀu − σv‖ ≤ tol · σ₁`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Leading `count` singular triplets of `a` by power iteration on `AᵀA`.
///
/// A block of `count` plus oversampling vectors is iterated together, kept
/// orthonormal by Gram–Schmidt, and resolved by a Rayleigh–Ritz step, so
/// clustered leading singular values converge at the rate of the gap after
/// the block rather than the gap inside it. Each triplet is accepted once
/// `‖Aᵀu − σv‖ ≤ tol · σ₁`.
pub fn leading_singular_vectors(
    a: &DMatrix<f64>,
    count: usize,
    opts: PowerOptions,
) -> Result<SingularTriplets> {
    let (m, n) = a.shape();
    let rank_cap = m.min(n);
    if count == 0 || count > rank_cap {
        return Err(SeedError::InvalidConfig(format!(
            "requested {count} singular triplets from a {m}x{n} matrix"
        )));
    }
    let block = rank_cap.min(count + count.max(OVERSAMPLE));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut v = DMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    orthonormalize_columns(&mut v, &mut rng);

    let mut best = None;
    for _ in 0..opts.max_iter {
        let (values, left, right) = rayleigh_ritz(a, &v, count, &mut rng)?;
        let sigma_max = values[0];
        let mut first_bad = None;
        for t in 0..count {
            let r = (a.tr_mul(&left.column(t)) - right.column(t) * values[t]).norm() / sigma_max;
            if r > opts.tol {
                first_bad = Some((t, r));
                break;
            }
        }
        let Some(bad) = first_bad else {
            return Ok(SingularTriplets {
                values: values[..count].to_vec(),
                left: left.columns(0, count).into_owned(),
                right: right.columns(0, count).into_owned(),
            });
        };
        best = Some((bad, values, left, right.clone()));
        let w = a * &right;
        v = a.tr_mul(&w);
        orthonormalize_columns(&mut v, &mut rng);
    }
    let ((triplet, residual), values, left, right) = best.expect("at least one iteration");
    let keep = triplet + 1;
    Err(SeedError::NoConvergence(Box::new(ConvergenceFailure {
        triplet,
        iterations: opts.max_iter,
        residual,
        best: SingularTriplets {
            values: values[..keep].to_vec(),
            left: left.columns(0, keep).into_owned(),
            right: right.columns(0, keep).into_owned(),
        },
    })))
}

/// Extra block vectors carried beyond the requested count.
const OVERSAMPLE: usize = 8;

/// Ritz triplets of `a` on the column span of the orthonormal `v`, sorted
/// by decreasing value. Zero values get orthonormal filler left vectors.
fn rayleigh_ritz(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let b = a * v;
    let svd = b.svd(true, true);
    let (u_b, vt_b) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let top = svd.singular_values[order[0]];
    if top == 0.0 {
        return Err(SeedError::Degenerate("matrix is identically zero".into()));
    }
    let p = order.len();
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let right = v * DMatrix::from_fn(p, p, |r, c| vt_b[(order[c], r)]);
    let mut lefts: Vec<DVector<f64>> = Vec::with_capacity(p);
    for (c, &i) in order.iter().enumerate() {
        if values[c] > ZERO_SIGMA * top {
            lefts.push(u_b.column(i).into_owned());
        } else if c < count {
            // The span holds no more of the range; any orthonormal completion works.
            let mut u = DVector::from_fn(a.nrows(), |_, _| rng.random::<f64>() - 0.5);
            orthonormalize(&mut u, &lefts);
            lefts.push(u);
        } else {
            lefts.push(DVector::zeros(a.nrows()));
        }
    }
    let values = values
        .iter()
        .map(|&s| if s > ZERO_SIGMA * top { s } else { 0.0 })
        .collect();
    Ok((values, DMatrix::from_columns(&lefts), right))
}

/// Singular values below this fraction of the top one are reported as zero.
const ZERO_SIGMA: f64 = 1e-14;

/// Two passes of Gram–Schmidt over the columns. A column that vanishes
/// against the earlier ones is replaced by a random direction.
fn orthonormalize_columns(v: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) {
    for j in 0..v.ncols() {
        let mut col = v.column(j).into_owned();
        loop {
            let before = col.norm();
            for _ in 0..2 {
                for i in 0..j {
                    let proj = v.column(i).dot(&col);
                    col.axpy(-proj, &v.column(i), 1.0);
                }
            }
            let norm = col.norm();
            if norm > 1e-10 * before {
                col /= norm;
                break;
            }
            col = DVector::from_fn(v.nrows(), |_, _| rng.random::<f64>() - 0.5);
        }
        v.set_column(j, &col);
    }
}

/// Two passes of classical Gram–Schmidt against `basis`, then normalization.
fn orthonormalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = b.dot(v);
            v.axpy(-proj, b, 1.0);
        }
    }
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
}

/// Number of singular values above `tol · σ₁`.
pub fn numerical_rank(x: &DMatrix<f64>, tol: f64) -> usize {
    let sv = x.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}
