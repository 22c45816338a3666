//! Data files.
//!
//! Matrices are CSV with one header row. Values are written with Rust's
//! shortest round-trip formatting, so a literal zero is written as `0.0` and
//! reads back as exactly zero.
//!
//! The low-rank model reads a binary frame stack: the 8-byte magic
//! `L1BFRAME`, then `T`, `rows`, `cols` as little-endian `u64`, then
//! `T·rows·cols` little-endian `f64` values, frame by frame, each frame
//! row-major.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Serialize};

use crate::config::ModelName;
use crate::{CliError, Result};

pub const FRAME_MAGIC: &[u8; 8] = b"L1BFRAME";
pub const TRUTH_FILE: &str = "truth.json";

/// In-memory data of one model.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Regression { x: DMatrix<f64>, y: DVector<f64> },
    Mixture { y: Vec<f64> },
    Fused { pixels: DMatrix<f64> },
    /// One row-major frame per row of `frames`.
    Lowrank { frames: DMatrix<f64>, rows: usize, cols: usize },
    Structured { a: DMatrix<f64>, s: DMatrix<f64> },
}

impl Dataset {
    pub fn model(&self) -> ModelName {
        match self {
            Self::Regression { .. } => ModelName::Regression,
            Self::Mixture { .. } => ModelName::Mixture,
            Self::Fused { .. } => ModelName::Fused,
            Self::Lowrank { .. } => ModelName::Lowrank,
            Self::Structured { .. } => ModelName::Structured,
        }
    }

    /// Writes the model's data files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        match self {
            Self::Regression { x, y } => {
                write_matrix(&dir.join("X.csv"), x, "x")?;
                write_matrix(&dir.join("y.csv"), &DMatrix::from_column_slice(y.len(), 1, y.as_slice()), "y")
            }
            Self::Mixture { y } => write_matrix(&dir.join("y.csv"), &DMatrix::from_column_slice(y.len(), 1, y), "y"),
            Self::Fused { pixels } => write_matrix(&dir.join("image.csv"), pixels, "c"),
            Self::Lowrank { frames, rows, cols } => write_frames(&dir.join("frames.bin"), frames, *rows, *cols),
            Self::Structured { a, s } => {
                write_matrix(&dir.join("A.csv"), a, "a")?;
                write_matrix(&dir.join("S.csv"), s, "s")
            }
        }
    }

    /// Reads the data files `model` expects from `dir`.
    pub fn read(dir: &Path, model: ModelName) -> Result<Self> {
        match model {
            ModelName::Regression => {
                let x = read_matrix(&dir.join("X.csv"))?;
                let y = read_column(&dir.join("y.csv"))?;
                if x.nrows() != y.len() {
                    return Err(CliError::Data(format!("X.csv has {} rows but y.csv has {}", x.nrows(), y.len())));
                }
                Ok(Self::Regression { x, y: DVector::from_vec(y) })
            }
            ModelName::Mixture => Ok(Self::Mixture { y: read_column(&dir.join("y.csv"))? }),
            ModelName::Fused => Ok(Self::Fused { pixels: read_matrix(&dir.join("image.csv"))? }),
            ModelName::Lowrank => {
                let (frames, rows, cols) = read_frames(&dir.join("frames.bin"))?;
                Ok(Self::Lowrank { frames, rows, cols })
            }
            ModelName::Structured => {
                let a = read_matrix(&dir.join("A.csv"))?;
                let s = read_matrix(&dir.join("S.csv"))?;
                if a.shape() != s.shape() || a.nrows() != a.ncols() {
                    return Err(CliError::Data(format!("A.csv is {:?} and S.csv is {:?}; both must be square and equal", a.shape(), s.shape())));
                }
                Ok(Self::Structured { a, s })
            }
            ModelName::Prior => Err(CliError::Data("the prior model has no data files".into())),
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Writes `m` with header `{prefix}1 … {prefix}k`.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:?}"))).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Reads a numeric CSV with a header row.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let ncols = r.headers().map_err(|e| csv_error(path, e))?.len();
    let mut values = Vec::new();
    let mut nrows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Data(format!("{}: row {}, column {}: not a number: {field:?}", path.display(), i + 1, j + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("{}: row {}, column {}: non-finite value", path.display(), i + 1, j + 1)));
            }
            values.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Data(format!("{}: no data", path.display())));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(CliError::Data(format!("{}: expected one column, found {}", path.display(), m.ncols())));
    }
    Ok(m.iter().copied().collect())
}

pub fn write_frames(path: &Path, frames: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if frames.ncols() != rows * cols {
        return Err(CliError::Data(format!("frames have {} pixels, expected {rows}×{cols}", frames.ncols())));
    }
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let mut bytes = FRAME_MAGIC.to_vec();
    for n in [frames.nrows(), rows, cols] {
        bytes.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for t in 0..frames.nrows() {
        for v in frames.row(t).iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(CliError::io(path))
}

pub fn read_frames(path: &Path) -> Result<(DMatrix<f64>, usize, usize)> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let bad = |msg: &str| CliError::Data(format!("{}: {msg}", path.display()));
    if bytes.len() < 32 || &bytes[..8] != FRAME_MAGIC {
        return Err(bad("not a frame stack (bad magic)"));
    }
    let dim = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
    let (t, rows, cols) = (dim(0), dim(1), dim(2));
    let count = t.checked_mul(rows).and_then(|v| v.checked_mul(cols)).ok_or_else(|| bad("dimensions overflow"))?;
    if t == 0 || rows == 0 || cols == 0 {
        return Err(bad("empty frame stack"));
    }
    if bytes.len() != 32 + 8 * count {
        return Err(bad(&format!("expected {} payload bytes, found {}", 8 * count, bytes.len() - 32)));
    }
    let values: Vec<f64> = bytes[32..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite pixel value"));
    }
    Ok((DMatrix::from_row_slice(t, rows * cols, &values), rows, cols))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_keeps_exact_zeros() {
        let dir = std::env::temp_dir().join(format!("l1ball-data-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let m = DMatrix::from_row_slice(2, 3, &[0.0, -1.5e-300, 1.0 / 3.0, 7.0, 0.0, -0.25]);
        let path = dir.join("m.csv");
        write_matrix(&path, &m, "x").unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn frames_round_trip() {
        let dir = std::env::temp_dir().join(format!("l1ball-frames-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let frames = DMatrix::from_fn(3, 6, |i, j| (i * 6 + j) as f64 * 0.5);
        let path = dir.join("f.bin");
        write_frames(&path, &frames, 2, 3).unwrap();
        assert_eq!(read_frames(&path).unwrap(), (frames, 2, 3));
        fs::write(&path, b"NOTFRAMExxxxxxxxxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(read_frames(&path), Err(CliError::Data(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}
