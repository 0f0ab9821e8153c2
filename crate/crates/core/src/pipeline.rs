//! Two-step decomposition `X ≈ D V`: select columns, normalize them into a
//! dictionary, then sparse-code every column of `X` against it.

use crate::error::{Result, SeedError};
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};
use crate::oasis::{oasis_select, OasisConfig};
use crate::samplers::{select_columns, SamplerMethod, SamplerSpec};
use crate::sparse_coding::{
    batch_omp, omp_zero_diag, Dictionary, SparseCode, SparseVector, StoppingRule,
};

/// How the selected columns themselves are coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Selected column `j` at atom `i` is `α_i d_i`, a single coefficient.
    Diagonal,
    /// Selected columns are coded over the other atoms only.
    ZeroDiag,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Diagonal => "diag",
            Variant::ZeroDiag => "zerodiag",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diag" | "diagonal" => Ok(Variant::Diagonal),
            "zerodiag" | "zero_diag" => Ok(Variant::ZeroDiag),
            other => Err(SeedError::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedConfig {
    pub sampler: SamplerSpec,
    pub oasis: OasisConfig,
    pub stop: StoppingRule,
    pub variant: Variant,
}

impl SeedConfig {
    /// oASIS selection of `l` columns with default settings.
    pub fn new(l: usize, stop: StoppingRule, variant: Variant, seed: u64) -> Self {
        Self {
            sampler: SamplerSpec::new(SamplerMethod::Oasis, l, seed),
            oasis: OasisConfig::new(l, seed),
            stop,
            variant,
        }
    }

    pub fn columns(&self) -> usize {
        self.sampler.columns
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sampler.columns != self.oasis.max_columns {
            return Err(SeedError::InvalidConfig(format!(
                "sampler asks for {} columns but oASIS for {}",
                self.sampler.columns, self.oasis.max_columns
            )));
        }
        if self.sampler.columns == 0 || self.sampler.columns > n {
            return Err(SeedError::InvalidConfig(format!(
                "number of columns must be in 1..={n}, got {}",
                self.sampler.columns
            )));
        }
        if self.sampler.method == SamplerMethod::Oasis {
            self.oasis.validate(n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedDecomposition {
    /// Normalized selected columns.
    pub dictionary: Dictionary,
    /// `L × N` coefficients, columns in the original order of `X`.
    pub code: SparseCode,
    /// Raw norms of the selected columns.
    pub alpha: Vec<f64>,
    pub selected: ColumnIndexSet,
    /// Per-step `max|Δ|` from oASIS; empty for other samplers.
    pub delta_trace: Vec<f64>,
    pub variant: Variant,
}

impl SeedDecomposition {
    pub fn natoms(&self) -> usize {
        self.dictionary.natoms()
    }

    pub fn ncols(&self) -> usize {
        self.code.ncols()
    }

    /// Number of stored coefficients in `V`.
    pub fn nnz(&self) -> usize {
        self.code.nnz()
    }

    /// Sparsity `|support|` of every column.
    pub fn sparsity(&self) -> Vec<usize> {
        self.code.columns.iter().map(SparseVector::sparsity).collect()
    }

    /// Checks the structural invariants of the chosen variant.
    pub fn check_structure(&self, stop: Option<&StoppingRule>) -> Result<()> {
        let l = self.natoms();
        let n = self.ncols();
        if self.alpha.len() != l || self.selected.len() != l || self.code.natoms != l {
            return Err(SeedError::Format("atom counts disagree".into()));
        }
        if self.dictionary.source_indices() != self.selected.as_slice() {
            return Err(SeedError::Format("atom sources differ from the selection".into()));
        }
        for (i, &j) in self.selected.iter().enumerate() {
            if j >= n {
                return Err(SeedError::Format(format!("selected column {j} out of range")));
            }
            let col = &self.code.columns[j];
            match self.variant {
                Variant::Diagonal => {
                    if col.support != [i] || col.coeffs != [self.alpha[i]] {
                        return Err(SeedError::Format(format!(
                            "selected column {j} is not coded by its own atom {i}"
                        )));
                    }
                }
                Variant::ZeroDiag => {
                    if col.support.contains(&i) {
                        return Err(SeedError::Format(format!(
                            "selected column {j} uses its own atom {i}"
                        )));
                    }
                }
            }
        }
        for (j, col) in self.code.columns.iter().enumerate() {
            if col.support.len() != col.coeffs.len() || col.support.iter().any(|&a| a >= l) {
                return Err(SeedError::Format(format!("malformed code for column {j}")));
            }
            let mut s = col.support.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != col.support.len() {
                return Err(SeedError::Format(format!("duplicate atom in column {j}")));
            }
            let own_atom = self.variant == Variant::Diagonal && self.selected.contains(j);
            if let Some(k) = stop.and_then(StoppingRule::k_max) {
                if !own_atom && col.sparsity() > k {
                    return Err(SeedError::Format(format!(
                        "column {j} has {} nonzeros, above k_max {k}",
                        col.sparsity()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Runs selection then sparse coding.
pub fn seed_decompose(x: &DataMatrix, cfg: &SeedConfig) -> Result<SeedDecomposition> {
    let (m, n) = x.shape();
    cfg.validate(n)?;
    if let Some(j) = x.columns().position(|c| c.iter().all(|&v| v == 0.0)) {
        return Err(SeedError::Degenerate(format!(
            "column {j} is zero and cannot be normalized"
        )));
    }

    let (selected, delta_trace) = if cfg.sampler.method == SamplerMethod::Oasis {
        let sel = oasis_select(x, &cfg.oasis)?;
        (sel.selected, sel.delta_trace)
    } else {
        (select_columns(x, &cfg.sampler)?, Vec::new())
    };
    let (dictionary, alpha) = Dictionary::from_selection(x, &selected)?;

    let mut atom_of = vec![None; n];
    for (i, &j) in selected.iter().enumerate() {
        atom_of[j] = Some(i);
    }
    let rest: Vec<usize> = (0..n).filter(|&j| atom_of[j].is_none()).collect();
    let mut columns = vec![SparseVector::default(); n];

    if !rest.is_empty() {
        let mut data = Vec::with_capacity(m * rest.len());
        for &j in &rest {
            data.extend_from_slice(x.column(j));
        }
        let unsampled = DataMatrix::from_column_major(m, rest.len(), data)?;
        let coded = batch_omp(&unsampled, &dictionary, &cfg.stop)?;
        for (&j, v) in rest.iter().zip(coded.columns) {
            columns[j] = v;
        }
    }

    match cfg.variant {
        Variant::Diagonal => {
            for (i, &j) in selected.iter().enumerate() {
                let r: f64 = x
                    .column(j)
                    .iter()
                    .zip(dictionary.atom(i))
                    .map(|(xv, d)| (xv - alpha[i] * d).powi(2))
                    .sum();
                columns[j] = SparseVector {
                    support: vec![i],
                    coeffs: vec![alpha[i]],
                    residual_norm: r.sqrt(),
                };
            }
        }
        Variant::ZeroDiag => {
            let xs = DataMatrix::from_dmatrix(x.select(&selected))?;
            let coded = omp_zero_diag(&xs, &dictionary, &cfg.stop)?;
            for (&j, v) in selected.iter().zip(coded.columns) {
                columns[j] = v;
            }
        }
    }

    Ok(SeedDecomposition {
        code: SparseCode {
            natoms: dictionary.natoms(),
            columns,
        },
        dictionary,
        alpha,
        selected,
        delta_trace,
        variant: cfg.variant,
    })
}

/// `X̂ = D V`.
pub fn reconstruct(dec: &SeedDecomposition) -> DataMatrix {
    DataMatrix::from_trusted(dec.code.reconstruct(&dec.dictionary))
}

/// Relative Frobenius error `‖X − D V‖_F / ‖X‖_F`.
pub fn relative_error(x: &DataMatrix, dec: &SeedDecomposition) -> f64 {
    let rec = reconstruct(dec);
    let diff: f64 = x
        .as_slice()
        .iter()
        .zip(rec.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let total = dot(x.as_slice(), x.as_slice());
    if total == 0.0 {
        0.0
    } else {
        (diff / total).sqrt()
    }
}
