//! Plain-text matrix files.
//!
//! ```text
//! %exactcomp-matrix 1
//! rows 2
//! cols 3
//! eps0 0.5
//! seed 7
//! data
//! 1 -0.5 0
//! 2 0 1.5
//! ```
//!
//! Header lines are `key value` pairs; `rows` and `cols` are required and
//! other keys are carried through. Values are written with the shortest
//! representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::linalg::{from_row_major, DenseMatrix};
use crate::{Error, Result};

const MAGIC: &str = "%exactcomp-matrix 1";

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    /// Extra header entries in file order, excluding `rows` and `cols`.
    pub header: Vec<(String, String)>,
    pub data: DenseMatrix,
}

impl MatrixFile {
    pub fn new(data: DenseMatrix) -> MatrixFile {
        MatrixFile { header: Vec::new(), data }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> MatrixFile {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let raw = self.get(key).ok_or_else(|| format!("missing header key `{key}`"))?;
        raw.parse().map_err(|_| format!("bad value `{raw}` for header key `{key}`"))
    }

    pub fn to_text(&self) -> String {
        let (m, n) = self.data.shape();
        let mut out = String::with_capacity(m * n * 8 + 64);
        let _ = writeln!(out, "{MAGIC}\nrows {m}\ncols {n}");
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} {v}");
        }
        out.push_str("data\n");
        for i in 0..m {
            for j in 0..n {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.data[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<MatrixFile, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err("missing magic line".into());
        }
        let mut header = Vec::new();
        let (mut rows, mut cols) = (None, None);
        loop {
            let line = lines.next().ok_or("missing `data` line")?.trim();
            if line == "data" {
                break;
            }
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| format!("malformed header line `{line}`"))?;
            let v = v.trim();
            match k {
                "rows" => rows = Some(v.parse::<usize>().map_err(|_| format!("bad rows `{v}`"))?),
                "cols" => cols = Some(v.parse::<usize>().map_err(|_| format!("bad cols `{v}`"))?),
                _ => header.push((k.to_string(), v.to_string())),
            }
        }
        let rows = rows.ok_or("missing rows")?;
        let cols = cols.ok_or("missing cols")?;
        let mut values = Vec::with_capacity(rows * cols);
        for tok in lines.flat_map(str::split_whitespace) {
            values.push(tok.parse::<f64>().map_err(|_| format!("bad value `{tok}`"))?);
        }
        let data = from_row_major(rows, cols, &values).map_err(|e| e.to_string())?;
        Ok(MatrixFile { header, data })
    }
}

pub fn write_matrix(path: &Path, file: &MatrixFile) -> Result<()> {
    fs::write(path, file.to_text()).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    MatrixFile::from_text(&text).map_err(|reason| Error::Format { path: path.display().to_string(), reason })
}

/// 0/1 matrix of a row-major flag vector.
pub fn mask_matrix(m: usize, n: usize, flags: &[bool]) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |i, j| if flags[i * n + j] { 1.0 } else { 0.0 })
}

pub fn mask_flags(data: &DenseMatrix) -> std::result::Result<Vec<bool>, String> {
    let (m, n) = data.shape();
    let mut flags = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            flags.push(match data[(i, j)] {
                x if x == 1.0 => true,
                x if x == 0.0 => false,
                x => return Err(format!("mask entry {x} at ({i}, {j}) is not 0 or 1")),
            });
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let data = DenseMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 2.5, 1.0 / 3.0, 0.0, -7.0]);
        let f = MatrixFile::new(data).with("eps0", 0.5).with("seed", 7u64);
        let back = MatrixFile::from_text(&f.to_text()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.parse::<f64>("eps0").unwrap(), 0.5);
        assert!(back.parse::<f64>("missing").is_err());
    }

    #[test]
    fn rejects_malformed() {
        assert!(MatrixFile::from_text("rows 1\ncols 1\ndata\n1\n").is_err());
        assert!(MatrixFile::from_text(&format!("{MAGIC}\nrows 1\ncols 2\ndata\n1\n")).is_err());
        assert!(MatrixFile::from_text(&format!("{MAGIC}\nrows 1\ncols 1\ndata\nNaN\n")).is_err());
        assert!(MatrixFile::from_text(&format!("{MAGIC}\nrows 1\ncols 1\n")).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let flags = vec![true, false, false, true, true, false];
        let m = mask_matrix(2, 3, &flags);
        assert_eq!(mask_flags(&m).unwrap(), flags);
        assert!(mask_flags(&DenseMatrix::from_row_slice(1, 1, &[0.5])).is_err());
    }
}
