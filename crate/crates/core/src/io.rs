//! Plain-text persistence: CSV for fields and branches (17 significant
//! digits, header row) and JSON for checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::continuation::{BranchRow, Checkpoint};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::torus::{EvenField, TorusGrid};

pub const BRANCH_COLUMNS: [&str; 9] = [
    "s_arc",
    "c",
    "amplitude",
    "min_f",
    "max_f",
    "gap",
    "crest_slope",
    "residual",
    "newton_iters",
];

/// Scientific notation with 17 significant digits, enough to round-trip f64.
pub fn format_value<T: Real>(v: T) -> String {
    format!("{:.16e}", v)
}

pub fn write_columns<W: Write, T: Real>(w: W, header: &[&str], columns: &[&[T]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::Contract(format!(
            "{} header names for {} columns",
            header.len(),
            columns.len()
        )));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Contract("CSV columns have different lengths".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for i in 0..rows {
        out.write_record(columns.iter().map(|c| format_value(c[i])))?;
    }
    out.flush()?;
    Ok(())
}

/// Columns x, `name`.
pub fn write_field_csv<W: Write, T: Real>(w: W, name: &str, field: &EvenField<T>) -> Result<()> {
    let x = field.grid().coordinates();
    write_columns(w, &["x", name], &[&x, field.values()])
}

/// Columns x, f, phi.
pub fn write_profile_csv<W: Write, T: Real>(w: W, f: &EvenField<T>, phi: &EvenField<T>) -> Result<()> {
    if f.grid() != phi.grid() {
        return Err(Error::Contract("profile fields live on different grids".into()));
    }
    let x = f.grid().coordinates();
    write_columns(w, &["x", "f", "phi"], &[&x, f.values(), phi.values()])
}

fn parse_value<T: Real>(token: &str, line: u64, column: usize) -> Result<T> {
    token
        .parse::<f64>()
        .ok()
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Parse(format!("line {line}, column {column}: `{token}` is not a number")))
}

/// Reads a header row followed by numeric rows.
pub fn read_columns<R: Read, T: Real>(r: R) -> Result<(Vec<String>, Vec<Vec<T>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse("empty CSV input".into()));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, tok) in record.iter().enumerate() {
            columns[k].push(parse_value(tok, line, k + 1)?);
        }
    }
    Ok((header, columns))
}

/// Reads an even field from columns x, value. The grid is inferred from
/// the row count and the first abscissa x₀ = −L/2; the abscissae and the
/// evenness of the values are checked.
pub fn read_field_csv<R: Read, T: Real>(r: R) -> Result<EvenField<T>> {
    let (header, columns) = read_columns::<_, T>(r)?;
    if header.len() < 2 || header[0] != "x" {
        return Err(Error::Parse(format!(
            "field CSV needs columns `x,<value>`, found `{}`",
            header.join(",")
        )));
    }
    let x = &columns[0];
    let m = x.len();
    let period = -T::lit(2.0) * x.first().copied().unwrap_or(T::zero());
    let grid = TorusGrid::new(period, m)?;
    let h = grid.spacing();
    for (j, &xj) in x.iter().enumerate() {
        if (xj - grid.node(j)).abs() > T::tol_floor(1e-9, 64.0) * h.max(T::one()) {
            return Err(Error::Parse(format!(
                "row {}: x = {} does not match the uniform grid node {} (L = {}, M = {})",
                j + 2,
                xj,
                grid.node(j),
                period,
                m
            )));
        }
    }
    EvenField::new(grid, columns[1].clone())
}

pub fn write_branch_csv<W: Write, T: Real>(w: W, rows: &[BranchRow<T>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BRANCH_COLUMNS)?;
    for r in rows {
        let vals = [r.s_arc, r.c, r.amplitude, r.min_f, r.max_f, r.gap, r.crest_slope, r.residual];
        let mut line: Vec<String> = vals.iter().map(|&v| format_value(v)).collect();
        line.push(r.newton_iters.to_string());
        out.write_record(&line)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_branch_csv<R: Read, T: Real>(r: R) -> Result<Vec<BranchRow<T>>> {
    let (header, columns) = read_columns::<_, T>(r)?;
    if header != BRANCH_COLUMNS {
        return Err(Error::Parse(format!("unexpected branch CSV header `{}`", header.join(","))));
    }
    let n = columns[0].len();
    Ok((0..n)
        .map(|i| BranchRow {
            s_arc: columns[0][i],
            c: columns[1][i],
            amplitude: columns[2][i],
            min_f: columns[3][i],
            max_f: columns[4][i],
            gap: columns[5][i],
            crest_slope: columns[6][i],
            residual: columns[7][i],
            newton_iters: columns[8][i].to_usize().unwrap_or(0),
        })
        .collect())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, S: Serialize>(mut w: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<S: DeserializeOwned>(path: &Path) -> Result<S> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn save_checkpoint<T: Real>(path: &Path, checkpoint: &Checkpoint<T>) -> Result<()> {
    write_json(create(path)?, checkpoint)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn field_round_trip_is_exact() {
        let grid = TorusGrid::new(TAU, 16).unwrap();
        let f = EvenField::from_fn(grid, |x| 1.0 + 0.1 * x.cos() + 1e-3 * (2.0 * x).cos());
        let mut buf = Vec::new();
        write_field_csv(&mut buf, "f", &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,f\n"));
        let back: EvenField<f64> = read_field_csv(&buf[..]).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().nodes(), 16);
    }

    #[test]
    fn bad_rows_name_the_line() {
        let err = read_field_csv::<_, f64>(&b"x,f\n-1,1\n0,abc\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn branch_round_trip() {
        let rows = vec![BranchRow {
            s_arc: 0.1,
            c: 1.224_744_871_391_589,
            amplitude: 0.05,
            min_f: 0.95,
            max_f: 1.05,
            gap: 0.17,
            crest_slope: 1e-3,
            residual: 3e-12,
            newton_iters: 4,
        }];
        let mut buf = Vec::new();
        write_branch_csv(&mut buf, &rows).unwrap();
        let back: Vec<BranchRow<f64>> = read_branch_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
    }
}
