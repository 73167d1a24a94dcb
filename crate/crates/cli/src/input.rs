//! CSV ingestion for count and parameter files.

use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Reads a rectangular numeric CSV. The first record is skipped as a
/// header when none of its fields parse as numbers.
fn read_table<T: FromStr>(path: &Path, what: &str) -> Result<Vec<Vec<T>>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse_table(file, &path.display().to_string(), what)
}

fn parse_table<T: FromStr, R: std::io::Read>(source: R, name: &str, what: &str) -> Result<Vec<Vec<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse(format!("{name}:{line}: {e}"))
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v = field.parse::<T>().map_err(|_| {
                CliError::Parse(format!("{name}:{line}:{}: expected {what}, found {field:?}", c + 1))
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Dimension(format!(
                    "{name}:{line}: {} columns, earlier rows have {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{name}: no data rows")));
    }
    Ok(rows)
}

/// Group counts: one row per group, one non-negative integer per category.
pub fn read_counts(path: &Path) -> Result<Vec<Vec<usize>>> {
    read_table(path, "a non-negative integer count")
}

/// Parent parameters: J rows of K positive decimals.
pub fn read_alpha(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = read_table(path, "a decimal")?;
    check_positive(&rows, &path.display().to_string())?;
    Ok(rows)
}

fn check_positive(rows: &[Vec<f64>], name: &str) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Parse(format!(
                    "{name}: row {}, column {}: parameter {v} must be positive",
                    i + 1,
                    c + 1
                )));
            }
        }
    }
    Ok(())
}

/// A comma-separated count vector such as `5,3`.
pub fn parse_count_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .enumerate()
        .map(|(c, f)| {
            f.trim()
                .parse()
                .map_err(|_| CliError::Parse(format!("--counts:1:{}: expected a non-negative integer, found {f:?}", c + 1)))
        })
        .collect()
}
