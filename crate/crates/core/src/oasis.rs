//! Accelerated sequential incoherent selection (oASIS).
//!
//! Columns of `X` are chosen greedily by the Nyström discrepancy of the Gram
//! matrix `G = XᵀX`,
//!
//! ```text
//! Δ_i = d_i − b_iᵀ W⁻¹ b_i,    d_i = x_iᵀx_i,  b_i = X_Sᵀx_i,  W = X_SᵀX_S,
//! ```
//!
//! i.e. the Schur complement that certifies `x_i` is independent of the
//! current selection. The state keeps `W⁻¹`, `C = XᵀX_S` (`n × k`) and
//! `R = W⁻¹Cᵀ` (`k × n`) and grows them with rank-1 block-inverse updates, so a
//! step costs `O(n·(m + k))` and the `n × n` Gram matrix is never formed.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SeedError};
use crate::matrix::{dot, ColumnIndexSet, DataMatrix};

/// Redraws allowed when the initial random columns are linearly dependent.
pub const INIT_REDRAWS: usize = 10;
/// Relative floor on the Schur complement while inverting the initial block.
const INIT_SCHUR_FLOOR: f64 = 1e-10;

/// Threshold `δ` on `max |Δ_i|` below which selection stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaStop {
    /// `δ = factor · max_i d_i`.
    Relative(f64),
    Absolute(f64),
}

impl Default for DeltaStop {
    fn default() -> Self {
        DeltaStop::Relative(1e-10)
    }
}

impl DeltaStop {
    fn resolve(self, max_diag: f64) -> f64 {
        match self {
            DeltaStop::Relative(f) => f * max_diag,
            DeltaStop::Absolute(v) => v,
        }
    }

    fn value(self) -> f64 {
        match self {
            DeltaStop::Relative(v) | DeltaStop::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OasisConfig {
    /// Maximum number of columns `L`.
    pub max_columns: usize,
    /// Columns drawn at random to seed the selection.
    pub initial_columns: usize,
    pub delta_stop: DeltaStop,
    pub seed: u64,
    /// Rebuild `W⁻¹` and `R` exactly every this many selections; 0 disables.
    pub recompute_every: usize,
}

impl OasisConfig {
    pub fn new(max_columns: usize, seed: u64) -> Self {
        Self {
            max_columns,
            initial_columns: 1,
            delta_stop: DeltaStop::default(),
            seed,
            recompute_every: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.initial_columns == 0
            || self.initial_columns > self.max_columns
            || self.max_columns > n
        {
            return Err(SeedError::InvalidConfig(format!(
                "oASIS needs 1 <= k_init <= L <= n, got k_init={}, L={}, n={n}",
                self.initial_columns, self.max_columns
            )));
        }
        let v = self.delta_stop.value();
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SeedError::InvalidConfig(format!(
                "delta stop must be finite and non-negative, got {v}"
            )));
        }
        Ok(())
    }
}

/// Result of one selection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Column `index` was appended; `delta` is its discrepancy at selection time.
    Selected { index: usize, delta: f64 },
    /// No unselected column exceeds the threshold; the state is unchanged.
    Stopped { max_abs_delta: f64 },
}

/// Incremental selection state.
#[derive(Debug, Clone)]
pub struct OasisState {
    selected: ColumnIndexSet,
    is_selected: Vec<bool>,
    winv: DMatrix<f64>,
    /// Columns of `C`, each of length `n`.
    c_cols: Vec<Vec<f64>>,
    /// Rows of `R`, each of length `n`.
    r_rows: Vec<Vec<f64>>,
    diag: Vec<f64>,
    delta: Vec<f64>,
    schur: Vec<f64>,
    threshold: f64,
    max_columns: usize,
    recompute_every: usize,
}

impl OasisState {
    /// Draws the initial columns and builds `C`, `W⁻¹`, `R` and `Δ`.
    pub fn init(x: &DataMatrix, cfg: &OasisConfig) -> Result<Self> {
        let n = x.ncols();
        cfg.validate(n)?;
        let diag = x.column_sq_norms();
        let max_diag = diag.iter().copied().fold(0.0, f64::max);
        if max_diag == 0.0 {
            return Err(SeedError::Degenerate("data matrix is identically zero".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let floor = INIT_SCHUR_FLOOR * max_diag;
        for _ in 0..=INIT_REDRAWS {
            let draw = rand::seq::index::sample(&mut rng, n, cfg.initial_columns).into_vec();
            if let Some(state) = Self::try_init(x, cfg, &diag, max_diag, floor, &draw) {
                return Ok(state);
            }
        }
        Err(SeedError::InitFailure {
            attempts: INIT_REDRAWS + 1,
        })
    }

    fn try_init(
        x: &DataMatrix,
        cfg: &OasisConfig,
        diag: &[f64],
        max_diag: f64,
        floor: f64,
        draw: &[usize],
    ) -> Option<Self> {
        let n = x.ncols();
        let mut winv = DMatrix::<f64>::zeros(0, 0);
        let mut c_cols: Vec<Vec<f64>> = Vec::with_capacity(cfg.max_columns);
        let mut schur = Vec::with_capacity(cfg.max_columns);
        // Invert W one bordered block at a time so each Schur complement is checked.
        for &idx in draw {
            let b: Vec<f64> = c_cols.iter().map(|c| c[idx]).collect();
            let q = mat_vec(&winv, &b);
            let s_c = diag[idx] - dot(&b, &q);
            if !(s_c > floor) {
                return None;
            }
            winv = bordered_inverse(&winv, &q, 1.0 / s_c);
            c_cols.push(gram_column(x, idx));
            schur.push(s_c);
        }
        let k = c_cols.len();
        let mut r_rows = vec![vec![0.0; n]; k];
        for (j, row) in r_rows.iter_mut().enumerate() {
            for (i, c) in c_cols.iter().enumerate() {
                let w = winv[(j, i)];
                for (r, v) in row.iter_mut().zip(c) {
                    *r += w * v;
                }
            }
        }
        let mut is_selected = vec![false; n];
        for &i in draw {
            is_selected[i] = true;
        }
        let mut state = Self {
            selected: ColumnIndexSet::from_indices(draw.to_vec(), n).ok()?,
            is_selected,
            winv,
            c_cols,
            r_rows,
            diag: diag.to_vec(),
            delta: Vec::new(),
            schur,
            threshold: cfg.delta_stop.resolve(max_diag),
            max_columns: cfg.max_columns,
            recompute_every: cfg.recompute_every,
        };
        state.recompute_delta();
        Some(state)
    }

    /// Selects the unselected column of largest `|Δ_i|`, or reports `Stopped`.
    pub fn step(&mut self, x: &DataMatrix) -> Result<StepOutcome> {
        if self.selected.len() >= self.max_columns {
            return Err(SeedError::InvalidConfig(format!(
                "selection budget of {} columns already used",
                self.max_columns
            )));
        }
        let Some((i, abs_delta)) = self.argmax_unselected() else {
            return Ok(StepOutcome::Stopped { max_abs_delta: 0.0 });
        };
        if abs_delta <= self.threshold {
            return Ok(StepOutcome::Stopped {
                max_abs_delta: abs_delta,
            });
        }
        let delta_i = self.delta[i];
        let s = 1.0 / delta_i;
        let q: Vec<f64> = self.r_rows.iter().map(|row| row[i]).collect();
        let c = gram_column(x, i);

        // t = qᵀCᵀ − cᵀ, so R ← [R + s q t; −s t].
        let mut t: Vec<f64> = c.iter().map(|v| -v).collect();
        for (qj, cj) in q.iter().zip(&self.c_cols) {
            for (tl, v) in t.iter_mut().zip(cj) {
                *tl += qj * v;
            }
        }
        for (qj, row) in q.iter().zip(self.r_rows.iter_mut()) {
            let f = s * qj;
            for (r, tl) in row.iter_mut().zip(&t) {
                *r += f * tl;
            }
        }
        self.r_rows.push(t.iter().map(|tl| -s * tl).collect());
        self.winv = bordered_inverse(&self.winv, &q, s);
        self.c_cols.push(c);
        self.selected.push(i);
        self.is_selected[i] = true;
        self.schur.push(delta_i);

        if self.recompute_every > 0 && self.selected.len().is_multiple_of(self.recompute_every) {
            self.refresh();
        }
        self.recompute_delta();
        Ok(StepOutcome::Selected { index: i, delta: delta_i })
    }

    /// Rebuilds `W⁻¹` and `R` from the stored Gram columns.
    pub fn refresh(&mut self) {
        let k = self.selected.len();
        let sel = self.selected.as_slice();
        let w = DMatrix::from_fn(k, k, |a, b| self.c_cols[b][sel[a]]);
        let inv = w
            .clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .or_else(|| w.try_inverse());
        let Some(inv) = inv else { return };
        self.winv = inv;
        for (j, row) in self.r_rows.iter_mut().enumerate() {
            row.iter_mut().for_each(|r| *r = 0.0);
            for (i, c) in self.c_cols.iter().enumerate() {
                let wji = self.winv[(j, i)];
                for (r, v) in row.iter_mut().zip(c) {
                    *r += wji * v;
                }
            }
        }
    }

    fn recompute_delta(&mut self) {
        let mut delta = self.diag.clone();
        for (c, r) in self.c_cols.iter().zip(&self.r_rows) {
            for ((dl, cv), rv) in delta.iter_mut().zip(c).zip(r) {
                *dl -= cv * rv;
            }
        }
        self.delta = delta;
    }

    fn argmax_unselected(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, d) in self.delta.iter().enumerate() {
            if self.is_selected[i] {
                continue;
            }
            let a = d.abs();
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        best
    }

    /// Largest `|Δ_i|` over unselected columns (0 when every column is selected).
    pub fn max_abs_delta(&self) -> f64 {
        self.argmax_unselected().map_or(0.0, |(_, a)| a)
    }

    pub fn selected(&self) -> &ColumnIndexSet {
        &self.selected
    }

    /// `(X_SᵀX_S)⁻¹` as maintained by the updates.
    pub fn winv(&self) -> &DMatrix<f64> {
        &self.winv
    }

    /// `C = XᵀX_S`, `n × k`.
    pub fn c(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        DMatrix::from_fn(n, self.c_cols.len(), |l, j| self.c_cols[j][l])
    }

    /// `R = W⁻¹Cᵀ`, `k × n`.
    pub fn r(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        DMatrix::from_fn(self.r_rows.len(), n, |j, l| self.r_rows[j][l])
    }

    /// `d_i = ‖x_i‖²`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Current discrepancies `Δ`.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Schur complement recorded for every selected column, in selection order.
    pub fn schur_complements(&self) -> &[f64] {
        &self.schur
    }

    /// Absolute stop threshold in force.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max_columns(&self) -> usize {
        self.max_columns
    }
}

/// Inverse of `[[W, b], [bᵀ, d]]` from `W⁻¹`, `q = W⁻¹b` and `s = 1/(d − bᵀq)`.
fn bordered_inverse(winv: &DMatrix<f64>, q: &[f64], s: f64) -> DMatrix<f64> {
    let k = winv.nrows();
    DMatrix::from_fn(k + 1, k + 1, |a, b| match (a == k, b == k) {
        (false, false) => winv[(a, b)] + s * q[a] * q[b],
        (false, true) => -s * q[a],
        (true, false) => -s * q[b],
        (true, true) => s,
    })
}

fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

/// `Xᵀx_i`, computed column-parallel.
fn gram_column(x: &DataMatrix, i: usize) -> Vec<f64> {
    let xi = x.column(i);
    x.as_slice()
        .par_chunks_exact(x.nrows())
        .map(|col| dot(col, xi))
        .collect()
}

/// Initializes a fresh state.
pub fn oasis_init(x: &DataMatrix, cfg: &OasisConfig) -> Result<OasisState> {
    OasisState::init(x, cfg)
}

/// Advances `state` by one selection.
pub fn oasis_step(state: &mut OasisState, x: &DataMatrix) -> Result<StepOutcome> {
    state.step(x)
}

#[derive(Debug, Clone)]
pub struct OasisSelection {
    pub selected: ColumnIndexSet,
    /// `max |Δ|` over unselected columns after initialization and after each selection.
    pub delta_trace: Vec<f64>,
    /// Schur complement of each selected column at the time it was added.
    pub schur_complements: Vec<f64>,
    /// True when selection ended on the threshold before reaching `L` columns.
    pub stopped_early: bool,
}

/// Runs initialization then steps until `L` columns are selected or the threshold is hit.
pub fn oasis_select(x: &DataMatrix, cfg: &OasisConfig) -> Result<OasisSelection> {
    let mut state = OasisState::init(x, cfg)?;
    let mut trace = vec![state.max_abs_delta()];
    let mut stopped_early = false;
    while state.selected().len() < cfg.max_columns {
        match state.step(x)? {
            StepOutcome::Selected { .. } => trace.push(state.max_abs_delta()),
            StepOutcome::Stopped { .. } => {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(OasisSelection {
        selected: state.selected().clone(),
        delta_trace: trace,
        schur_complements: state.schur_complements().to_vec(),
        stopped_early,
    })
}
