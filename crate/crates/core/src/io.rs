//! Plain-text exchange formats.
//!
//! * fields: CSV with `M` values per line and `N` lines, line `j` holding row `j`;
//! * matrices: coordinate text, one `row col value` triple per line, 0-based;
//! * lattice vector fields: CSV lines `p,q,v1,v2` covering the `2M x 2N`
//!   half-step lattice.
//!
//! Values are written with 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::coefficients::Lattice;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::sparse::CsrMatrix;

/// Formats a value with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn field_to_csv(grid: &GridSpec, values: &[f64]) -> Result<String> {
    if values.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch { expected: grid.num_cells(), got: values.len() });
    }
    let mut out = String::with_capacity(values.len() * 25);
    for row in values.chunks(grid.cells_x()) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse a field written by [`field_to_csv`]. Blank lines are ignored.
pub fn field_from_csv(grid: &GridSpec, text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.num_cells());
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: cannot parse {tok:?} as a number", lineno + 1)))?;
            values.push(v);
        }
        if values.len() - before != grid.cells_x() {
            return Err(Error::Parse(format!(
                "line {}: expected {} values, found {}",
                lineno + 1,
                grid.cells_x(),
                values.len() - before
            )));
        }
        rows += 1;
    }
    if rows != grid.cells_y() {
        return Err(Error::Parse(format!("expected {} rows, found {rows}", grid.cells_y())));
    }
    Ok(values)
}

pub fn read_field(path: &Path, grid: &GridSpec) -> Result<Vec<f64>> {
    field_from_csv(grid, &fs::read_to_string(path)?)
}

pub fn write_field(path: &Path, grid: &GridSpec, values: &[f64]) -> Result<()> {
    Ok(fs::write(path, field_to_csv(grid, values)?)?)
}

/// Coordinate text of all stored entries, in row-major order.
pub fn matrix_to_coordinate(m: &CsrMatrix) -> String {
    let mut out = String::with_capacity(m.nnz() * 40);
    for r in 0..m.n_rows() {
        for (c, v) in m.row(r) {
            let _ = writeln!(out, "{r} {c} {}", fmt_f64(v));
        }
    }
    out
}

/// Parse coordinate text into `(row, col, value)` triples.
pub fn coordinate_triples(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let (Some(r), Some(c), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse(format!("line {}: expected `row col value`", lineno + 1)));
        };
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        out.push((
            r.parse().map_err(|_| bad("row"))?,
            c.parse().map_err(|_| bad("column"))?,
            v.parse().map_err(|_| bad("value"))?,
        ));
    }
    Ok(out)
}

pub fn lattice_to_csv(lattice: &Lattice<[f64; 2]>) -> String {
    let (w, h) = lattice.dims();
    let mut out = String::new();
    for q in 0..h {
        for p in 0..w {
            let v = lattice.get(p as i64, q as i64);
            let _ = writeln!(out, "{p},{q},{},{}", fmt_f64(v[0]), fmt_f64(v[1]));
        }
    }
    out
}

/// Read `p,q,v1,v2` lines covering every point of the half-step lattice of
/// `grid` exactly once.
pub fn read_lattice_field(path: &Path, grid: &GridSpec) -> Result<Lattice<[f64; 2]>> {
    lattice_from_csv(&fs::read_to_string(path)?, grid)
}

pub fn lattice_from_csv(text: &str, grid: &GridSpec) -> Result<Lattice<[f64; 2]>> {
    let (w, h) = (2 * grid.cells_x(), 2 * grid.cells_y());
    let mut values: Vec<Option<[f64; 2]>> = vec![None; w * h];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("line {}: expected `p,q,v1,v2`", lineno + 1));
        if toks.len() != 4 {
            return Err(bad());
        }
        let p: usize = toks[0].parse().map_err(|_| bad())?;
        let q: usize = toks[1].parse().map_err(|_| bad())?;
        let v1: f64 = toks[2].parse().map_err(|_| bad())?;
        let v2: f64 = toks[3].parse().map_err(|_| bad())?;
        if p >= w || q >= h {
            return Err(Error::Parse(format!("line {}: lattice point ({p},{q}) out of range", lineno + 1)));
        }
        if values[q * w + p].replace([v1, v2]).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate lattice point ({p},{q})", lineno + 1)));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| Error::Parse(format!("missing lattice point ({},{})", k % w, k / w))))
        .collect::<Result<Vec<_>>>()?;
    Lattice::from_values(*grid, values)
}
