//! Matrix files, PGM images and run manifests.
//!
//! Binary matrices (`.mmx`) are the magic `MMX1`, two little-endian `u64`
//! dimensions (rows, cols) and then the entries as little-endian `f64` in
//! row-major order. CSV files hold one row per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{BackendMode, DenseMatrix};
use crate::mm::MmTrace;

const MAGIC: &[u8; 4] = b"MMX1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.mmx` is binary; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mmx") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    let file = File::open(path)?;
    match format {
        MatrixFormat::Csv => read_csv(BufReader::new(file)),
        MatrixFormat::Binary => read_binary(BufReader::new(file)),
    }
}

pub fn save_matrix(m: &DenseMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Csv => write_csv(m, &mut out)?,
        MatrixFormat::Binary => write_binary(m, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

/// Picks the format from the extension.
pub fn load_matrix_auto(path: &Path) -> Result<DenseMatrix> {
    load_matrix(path, MatrixFormat::from_path(path))
}

pub fn save_matrix_auto(m: &DenseMatrix, path: &Path) -> Result<()> {
    save_matrix(m, path, MatrixFormat::from_path(path))
}

/// Comma-separated reals, one row per line. Blank lines are skipped.
pub fn read_csv<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = n + 1;
        let before = data.len();
        for (f, field) in line.split(',').enumerate() {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("field {} is not a number: {field:?}", f + 1),
            })?;
            data.push(value);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("row has {width} fields, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

/// Shortest round-trip decimal for every entry.
pub fn write_csv<W: Write>(m: &DenseMatrix, out: &mut W) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<DenseMatrix> {
    let mut offset = 0u64;
    let mut take = |buf: &mut [u8], what: &str| -> Result<()> {
        reader.read_exact(buf).map_err(|err| match err.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format {
                offset,
                msg: format!("truncated file while reading {what}"),
            },
            _ => Error::Io(err),
        })?;
        offset += buf.len() as u64;
        Ok(())
    };
    let mut magic = [0u8; 4];
    take(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected \"MMX1\""),
        });
    }
    let mut word = [0u8; 8];
    take(&mut word, "row count")?;
    let rows = u64::from_le_bytes(word);
    take(&mut word, "column count")?;
    let cols = u64::from_le_bytes(word);
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: format!("dimensions {rows}x{cols} overflow"),
        })?;
    let mut data = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        take(&mut word, "matrix entries")?;
        data.push(f64::from_le_bytes(word));
    }
    DenseMatrix::from_vec(rows as usize, cols as usize, data)
}

pub fn write_binary<W: Write>(m: &DenseMatrix, out: &mut W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// 16-bit binary PGM scaled so the largest entry maps to 65535.
pub fn write_pgm(image: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    encode_pgm(image, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn encode_pgm<W: Write>(image: &DenseMatrix, out: &mut W) -> Result<()> {
    image.require_nonnegative("image")?;
    if !image.is_finite() {
        return Err(Error::NonFinite {
            context: "image".into(),
        });
    }
    let max = if image.is_empty() { 0.0 } else { image.max() };
    write!(out, "P5\n{} {}\n65535\n", image.cols(), image.rows())?;
    for &v in image.as_slice() {
        let level = if max > 0.0 {
            (v / max * 65535.0).round() as u16
        } else {
            0
        };
        out.write_all(&level.to_be_bytes())?;
    }
    Ok(())
}

/// Reproducibility record written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub solver: String,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Solver-specific parameters such as rank, penalty or dimension.
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub backend: BackendMode,
    pub inputs: Vec<InputDigest>,
    pub converged: bool,
    pub final_objective: f64,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(
        solver: &str,
        config: &crate::mm::MmConfig,
        backend: BackendMode,
        trace: &MmTrace,
    ) -> Self {
        RunManifest {
            solver: solver.to_string(),
            epsilon: config.epsilon,
            max_iters: config.max_iters,
            seed: config.seed,
            parameters: serde_json::Map::new(),
            backend,
            inputs: Vec::new(),
            converged: trace.converged,
            final_objective: trace.final_objective(),
            iterations: trace.iters,
            wall_time_seconds: trace.wall_time,
        }
    }

    pub fn with_parameter(mut self, name: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(name.to_string(), value.into());
        self
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        });
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
