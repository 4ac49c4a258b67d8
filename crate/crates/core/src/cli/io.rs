//! CSV ingestion and plot-ready CSV output.

use std::fmt::Write as _;
use std::path::Path;

use crate::basis::TimeGrid;
use crate::cluster::Move;
use crate::error::{Error, Result};
use crate::lsq::{Prototype, SignalSet};

/// Reads comma-separated records, skipping a leading header when its first
/// cell is not a number. Returns `(line number, fields)` pairs.
fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect::<Vec<_>>()));
    }
    if let Some((_, first)) = out.first() {
        if first[0].parse::<f64>().is_err() {
            out.remove(0);
        }
    }
    Ok(out)
}

/// Loads a signal table: first column time, one column per signal. Rows are
/// sorted by time; repeated times are rejected.
pub fn load_signals_csv(path: &Path) -> Result<(TimeGrid, SignalSet)> {
    let records = read_records(path)?;
    let Some((_, first)) = records.first() else {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    };
    let width = first.len();
    if width < 2 {
        return Err(Error::Input(format!("{}: no signal columns", path.display())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(Error::RaggedRow {
                row: *line,
                expected: width,
                found: fields.len(),
            });
        }
        let row = fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::Input(format!("row {line}, column {}: invalid number '{f}'", c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let grid = TimeGrid::new(rows.iter().map(|r| r[0]).collect())?;
    let columns: Vec<Vec<f64>> = (1..width).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    let signals = SignalSet::from_columns(grid.clone(), &columns)?;
    Ok((grid, signals))
}

/// Loads `signal_index,from,to` triples.
pub fn load_moves_csv(path: &Path) -> Result<Vec<Move>> {
    read_records(path)?
        .into_iter()
        .map(|(line, fields)| {
            if fields.len() != 3 {
                return Err(Error::RaggedRow {
                    row: line,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let num = |i: usize| {
                fields[i]
                    .parse::<usize>()
                    .map_err(|_| Error::Input(format!("row {line}: invalid index '{}'", fields[i])))
            };
            Ok(Move {
                signal: num(0)?,
                from: num(1)?,
                to: num(2)?,
            })
        })
        .collect()
}

pub fn prototypes_csv(prototypes: &[Prototype]) -> String {
    let mut out = String::from("cluster,exponent,coefficient\n");
    for (c, p) in prototypes.iter().enumerate() {
        for (m, x) in p.basis().exponents().iter().zip(p.coefficients()) {
            writeln!(out, "{c},{m},{x}").unwrap();
        }
    }
    out
}

pub fn assignments_csv(assignments: &[usize]) -> String {
    let mut out = String::from("signal_index,cluster\n");
    for (j, c) in assignments.iter().enumerate() {
        writeln!(out, "{j},{c}").unwrap();
    }
    out
}
