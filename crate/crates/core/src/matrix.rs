//! Dense column-major data matrix and ordered column index sets.

use nalgebra::DMatrix;

use crate::error::{Result, SeedError};

/// Dense `m × n` real matrix whose columns are data points.
///
/// Entries are stored column-major and are guaranteed finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    /// Builds a matrix from column-major data.
    pub fn from_column_major(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(SeedError::InvalidInput(format!(
                "expected {} entries for a {m}x{n} matrix, got {}",
                m * n,
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_vec(m, n, data))
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        let (m, n) = inner.shape();
        if m == 0 || n == 0 {
            return Err(SeedError::InvalidInput(format!(
                "matrix must be non-empty, got {m}x{n}"
            )));
        }
        if let Some(pos) = inner.iter().position(|v| !v.is_finite()) {
            return Err(SeedError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos % m,
                pos / m
            )));
        }
        Ok(Self { inner })
    }

    /// Wraps a matrix produced internally from finite inputs.
    pub(crate) fn from_trusted(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|v| v.is_finite()));
        Self { inner }
    }

    /// Builds a matrix whose columns are the given points.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != m) {
            return Err(SeedError::InvalidInput("columns have unequal lengths".into()));
        }
        let data = columns.iter().flatten().copied().collect();
        Self::from_column_major(m, columns.len(), data)
    }

    /// Ambient dimension.
    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    /// Number of data points.
    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    /// The `i`-th data point.
    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.nrows();
        &self.inner.as_slice()[i * m..(i + 1) * m]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.inner.as_slice().chunks_exact(self.nrows())
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// `m × |S|` submatrix of the selected columns, in selection order.
    pub fn select(&self, set: &ColumnIndexSet) -> DMatrix<f64> {
        let m = self.nrows();
        let mut out = DMatrix::zeros(m, set.len());
        for (k, &j) in set.iter().enumerate() {
            out.column_mut(k).copy_from_slice(self.column(j));
        }
        out
    }

    /// Squared ℓ2 norm of every column.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        self.columns().map(|c| dot(c, c)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn transpose(&self) -> DataMatrix {
        DataMatrix {
            inner: self.inner.transpose(),
        }
    }
}

/// Ordered set of distinct column indices; order is selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnIndexSet {
    indices: Vec<usize>,
}

impl ColumnIndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates that `indices` are distinct and below `n`.
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(SeedError::InvalidInput(format!(
                    "column index {i} out of range for {n} columns"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(SeedError::InvalidInput(format!("duplicate column index {i}")));
            }
        }
        Ok(Self { indices })
    }

    /// Appends `index`; returns `false` (and leaves the set unchanged) on a duplicate.
    pub fn push(&mut self, index: usize) -> bool {
        if self.indices.contains(&index) {
            return false;
        }
        self.indices.push(index);
        true
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.indices.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.indices
    }
}

impl<'a> IntoIterator for &'a ColumnIndexSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.indices.iter()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
