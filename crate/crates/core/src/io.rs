//! Matrix files (CSV and the `seedbin` binary format) and decomposition files.
//!
//! `seedbin` layout, all little-endian: the 4 bytes `SEED`, a `u32` version,
//! `u64` row count `m`, `u64` column count `N`, then `m·N` `f64` entries in
//! column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SeedError};
use crate::matrix::{ColumnIndexSet, DataMatrix};
use crate::pipeline::{SeedDecomposition, Variant};
use crate::sparse_coding::{Dictionary, SparseCode, SparseVector};

pub const SEEDBIN_MAGIC: &[u8; 4] = b"SEED";
pub const SEEDBIN_VERSION: u32 = 1;
pub const DECOMPOSITION_MAGIC: &[u8; 4] = b"SEDC";
pub const DECOMPOSITION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Seedbin,
}

impl MatrixFormat {
    /// `.csv` files are CSV; anything else is `seedbin`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Seedbin,
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "seedbin" | "bin" => Ok(MatrixFormat::Seedbin),
            other => Err(SeedError::InvalidConfig(format!("unknown matrix format '{other}'"))),
        }
    }
}

/// Loads a matrix. For CSV, `rows_are_points` reads one data point per line
/// (the file is transposed on load); otherwise lines are dimensions.
pub fn load_matrix(path: &Path, format: MatrixFormat, rows_are_points: bool) -> Result<DataMatrix> {
    match format {
        MatrixFormat::Csv => read_csv(BufReader::new(File::open(path)?), rows_are_points),
        MatrixFormat::Seedbin => read_seedbin(BufReader::new(File::open(path)?)),
    }
}

pub fn save_matrix(
    path: &Path,
    x: &DataMatrix,
    format: MatrixFormat,
    rows_are_points: bool,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Csv => write_csv(&mut w, x, rows_are_points)?,
        MatrixFormat::Seedbin => write_seedbin(&mut w, x)?,
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV. Errors carry 1-based line and field numbers.
pub fn read_csv<R: Read>(reader: R, rows_are_points: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            SeedError::Parse {
                row,
                col: 0,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let mut values = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| SeedError::Parse {
                row: line,
                col: c + 1,
                msg: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(SeedError::Parse {
                    row: line,
                    col: c + 1,
                    msg: format!("'{field}' is not finite"),
                });
            }
            values.push(v);
        }
        if let Some(first) = rows.first() {
            if values.len() != first.len() {
                return Err(SeedError::Parse {
                    row: line,
                    col: values.len().min(first.len()) + 1,
                    msg: format!("expected {} fields, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push(values);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(SeedError::Parse {
            row: 1,
            col: 1,
            msg: "no data".into(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if rows_are_points {
        // Row-major r × c with rows as points is column-major c × r.
        DataMatrix::from_column_major(c, r, flat)
    } else {
        DataMatrix::from_dmatrix(DMatrix::from_row_slice(r, c, &flat))
    }
}

pub fn write_csv<W: Write>(w: &mut W, x: &DataMatrix, rows_are_points: bool) -> Result<()> {
    let (m, n) = x.shape();
    let (lines, fields) = if rows_are_points { (n, m) } else { (m, n) };
    let mut line = String::new();
    for a in 0..lines {
        line.clear();
        for b in 0..fields {
            if b > 0 {
                line.push(',');
            }
            let v = if rows_are_points { x.get(b, a) } else { x.get(a, b) };
            // `Display` for f64 is the shortest string that parses back exactly.
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_seedbin<W: Write>(w: &mut W, x: &DataMatrix) -> Result<()> {
    w.write_all(SEEDBIN_MAGIC)?;
    w.write_all(&SEEDBIN_VERSION.to_le_bytes())?;
    w.write_all(&(x.nrows() as u64).to_le_bytes())?;
    w.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for v in x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_seedbin<R: Read>(mut reader: R) -> Result<DataMatrix> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut cur = Cursor::new(&bytes);
    cur.magic(SEEDBIN_MAGIC, SEEDBIN_VERSION)?;
    let m = cur.len_field("row count")?;
    let n = cur.len_field("column count")?;
    let count = m
        .checked_mul(n)
        .filter(|&c| c.checked_mul(8) == Some(cur.remaining()))
        .ok_or_else(|| {
            SeedError::Format(format!(
                "header says {m}x{n} but {} payload bytes follow",
                cur.remaining()
            ))
        })?;
    let data = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    DataMatrix::from_column_major(m, n, data)
        .map_err(|e| SeedError::Format(format!("seedbin payload: {e}")))
}

/// Bounds-checked little-endian reader over a byte buffer.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| SeedError::Format(format!("file truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn magic(&mut self, magic: &[u8; 4], version: u32) -> Result<()> {
        if &self.take::<4>()? != magic {
            return Err(SeedError::Format(format!(
                "missing '{}' magic bytes",
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != version {
            return Err(SeedError::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn len_field(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| SeedError::Format(format!("{what} {v} too large")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Writes a decomposition.
///
/// Layout after the `SEDC` magic and `u32` version: variant byte (0 diagonal,
/// 1 zero-diagonal), `u64` m, N, L; L `u64` selected indices; L `f64` norms;
/// `m·L` `f64` atoms column-major; `u64` trace length and the `f64` trace;
/// then per column a `u64` support size, the `f64` residual norm and
/// `(u64 atom, f64 coefficient)` pairs in selection order.
pub fn write_decomposition<W: Write>(w: &mut W, dec: &SeedDecomposition) -> Result<()> {
    let put_u64 = |w: &mut W, v: usize| w.write_all(&(v as u64).to_le_bytes());
    w.write_all(DECOMPOSITION_MAGIC)?;
    w.write_all(&DECOMPOSITION_VERSION.to_le_bytes())?;
    w.write_all(&[match dec.variant {
        Variant::Diagonal => 0,
        Variant::ZeroDiag => 1,
    }])?;
    put_u64(w, dec.dictionary.dim())?;
    put_u64(w, dec.ncols())?;
    put_u64(w, dec.natoms())?;
    for &j in &dec.selected {
        put_u64(w, j)?;
    }
    for a in &dec.alpha {
        w.write_all(&a.to_le_bytes())?;
    }
    for v in dec.dictionary.atoms().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    put_u64(w, dec.delta_trace.len())?;
    for v in &dec.delta_trace {
        w.write_all(&v.to_le_bytes())?;
    }
    for col in &dec.code.columns {
        put_u64(w, col.support.len())?;
        w.write_all(&col.residual_norm.to_le_bytes())?;
        for (&a, c) in col.support.iter().zip(&col.coeffs) {
            put_u64(w, a)?;
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_decomposition<R: Read>(mut reader: R) -> Result<SeedDecomposition> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut cur = Cursor::new(&bytes);
    cur.magic(DECOMPOSITION_MAGIC, DECOMPOSITION_VERSION)?;
    let variant = match cur.u8()? {
        0 => Variant::Diagonal,
        1 => Variant::ZeroDiag,
        b => return Err(SeedError::Format(format!("unknown variant byte {b}"))),
    };
    let m = cur.len_field("row count")?;
    let n = cur.len_field("column count")?;
    let l = cur.len_field("atom count")?;
    // Every declared element needs at least 8 bytes; reject absurd headers early.
    let need = l.saturating_mul(m.saturating_add(2)).saturating_add(n);
    if need.saturating_mul(8) > cur.remaining() {
        return Err(SeedError::Format("header sizes exceed the file length".into()));
    }
    let selected = (0..l).map(|_| cur.len_field("index")).collect::<Result<Vec<_>>>()?;
    let alpha = (0..l).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let atoms = (0..m * l).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let trace_len = cur.len_field("trace length")?;
    if trace_len.saturating_mul(8) > cur.remaining() {
        return Err(SeedError::Format("trace length exceeds the file length".into()));
    }
    let delta_trace = (0..trace_len).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let mut columns = Vec::with_capacity(n);
    for _ in 0..n {
        let k = cur.len_field("support size")?;
        if k > l {
            return Err(SeedError::Format(format!("support of {k} atoms with only {l} atoms")));
        }
        let residual_norm = cur.f64()?;
        let mut support = Vec::with_capacity(k);
        let mut coeffs = Vec::with_capacity(k);
        for _ in 0..k {
            support.push(cur.len_field("atom")?);
            coeffs.push(cur.f64()?);
        }
        columns.push(SparseVector {
            support,
            coeffs,
            residual_norm,
        });
    }
    if cur.remaining() != 0 {
        return Err(SeedError::Format(format!("{} trailing bytes", cur.remaining())));
    }
    let selected = ColumnIndexSet::from_indices(selected, n)
        .map_err(|e| SeedError::Format(format!("selection: {e}")))?;
    let dictionary = Dictionary::new(DMatrix::from_vec(m, l, atoms), selected.as_slice().to_vec())
        .map_err(|e| SeedError::Format(format!("atoms: {e}")))?;
    let dec = SeedDecomposition {
        dictionary,
        code: SparseCode { natoms: l, columns },
        alpha,
        selected,
        delta_trace,
        variant,
    };
    dec.check_structure(None)?;
    Ok(dec)
}

pub fn save_decomposition(path: &Path, dec: &SeedDecomposition) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_decomposition(&mut w, dec)?;
    w.flush()?;
    Ok(())
}

pub fn load_decomposition(path: &Path) -> Result<SeedDecomposition> {
    read_decomposition(BufReader::new(File::open(path)?))
}
