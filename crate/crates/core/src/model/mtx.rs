//! Matrix Market files: `coordinate real symmetric` (lower triangle) for
//! system matrices, `array real general` for dense blocks such as mode
//! shapes. Indices in the files are 1-based as the format requires; values
//! are written in shortest round-trip form so reading back is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// What a file declared, alongside its values.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    pub matrix: DMatrix<f64>,
    pub symmetry: Symmetry,
}

pub fn write_symmetric(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            if a[(i, j)] != 0.0 {
                entries.push((i, j, a[(i, j)]));
            }
        }
    }
    let mut s = String::with_capacity(32 * entries.len() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{n} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {v:e}", i + 1, j + 1);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_dense(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut s = String::with_capacity(24 * a.len() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.nrows(), a.ncols());
    // column-major, as the array format specifies
    for v in a.iter() {
        let _ = writeln!(s, "{v:e}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<MatrixFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|m| Error::format(path, m))
}

pub fn parse(text: &str) -> std::result::Result<MatrixFile, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(format!("bad header line: {header:?}"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(format!("unsupported storage {other:?}")),
    };
    if tokens[3] != "real" && tokens[3] != "double" && tokens[3] != "integer" {
        return Err(format!("unsupported field {:?}", tokens[3]));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(format!("unsupported symmetry {other:?}")),
    };
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line_no, size_line) = body.next().ok_or("missing size line")?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("line {}: bad size line: {e}", size_line_no + 1))?;
    let parse_f = |t: &str, line: usize| {
        t.parse::<f64>()
            .map_err(|e| format!("line {line}: bad value {t:?}: {e}"))
    };
    if coordinate {
        let [nr, nc, nnz] = sizes[..] else {
            return Err("coordinate size line needs rows cols nnz".into());
        };
        if symmetry == Symmetry::Symmetric && nr != nc {
            return Err("symmetric matrix must be square".into());
        }
        let mut a = DMatrix::zeros(nr, nc);
        let mut seen = 0;
        for (no, line) in body {
            let line_no = no + 1;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(format!("line {line_no}: expected `i j value`"));
            }
            let i: usize = t[0].parse().map_err(|_| format!("line {line_no}: bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| format!("line {line_no}: bad column index"))?;
            if i == 0 || j == 0 || i > nr || j > nc {
                return Err(format!("line {line_no}: index ({i}, {j}) out of range"));
            }
            let v = parse_f(t[2], line_no)?;
            let (i, j) = (i - 1, j - 1);
            match symmetry {
                Symmetry::Symmetric => {
                    if i < j {
                        return Err(format!(
                            "line {line_no}: entry ({}, {}) lies in the upper triangle",
                            i + 1,
                            j + 1
                        ));
                    }
                    a[(i, j)] += v;
                    if i != j {
                        a[(j, i)] += v;
                    }
                }
                Symmetry::General => a[(i, j)] += v,
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(format!("declared {nnz} entries, found {seen}"));
        }
        Ok(MatrixFile { matrix: a, symmetry })
    } else {
        let [nr, nc] = sizes[..] else {
            return Err("array size line needs rows cols".into());
        };
        if symmetry != Symmetry::General {
            return Err("only general array storage is supported".into());
        }
        let mut values = Vec::with_capacity(nr * nc);
        for (no, line) in body {
            for t in line.split_whitespace() {
                values.push(parse_f(t, no + 1)?);
            }
        }
        if values.len() != nr * nc {
            return Err(format!("declared {} values, found {}", nr * nc, values.len()));
        }
        Ok(MatrixFile {
            matrix: DMatrix::from_vec(nr, nc, values),
            symmetry,
        })
    }
}
