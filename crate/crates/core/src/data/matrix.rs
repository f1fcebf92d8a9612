use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::graph::Connectome;

/// Largest accepted `|w_ij - w_ji|`; smaller gaps are closed by copying the upper triangle.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Parses CSV text into a connectome. `origin` prefixes error messages.
pub fn parse_matrix(text: &str, origin: &str) -> Result<Connectome> {
    let bad = |msg: String| Error::Validation(format!("{origin}: {msg}"));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, field)| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("non-numeric field {:?} at ({i}, {j})", field.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(bad(format!("row {i} has {} fields, expected {n}", row.len())));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let w = rows[i][j];
            if !w.is_finite() {
                return Err(bad(format!("non-finite weight at ({i}, {j})")));
            }
            if i == j && w != 0.0 {
                return Err(bad(format!("nonzero diagonal {w} at ({i}, {i})")));
            }
            if w < 0.0 {
                return Err(bad(format!("negative weight {w} at ({i}, {j})")));
            }
            if j > i {
                let gap = (w - rows[j][i]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(bad(format!("asymmetric weights at ({i}, {j}): {w} vs {}", rows[j][i])));
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            rows[i][j] = rows[j][i];
        }
    }
    Connectome::from_rows(&rows).map_err(|e| bad(e.to_string()))
}

/// CSV with 17 significant digits per entry, which parses back bit-exactly.
pub fn render_matrix(c: &Connectome) -> String {
    let n = c.n();
    let mut out = String::with_capacity(n * n * 24);
    for i in 0..n {
        for (j, w) in c.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{w:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Connectome> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn write_matrix(c: &Connectome, path: &Path) -> Result<()> {
    write_atomic(path, render_matrix(c).as_bytes())
}
