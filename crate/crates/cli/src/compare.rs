//! Distribution comparison between two CSV outputs.
//!
//! Both files need an `i` column holding 0, 1, 2, ... in order, plus a
//! probability column. The shorter file is padded with zero mass, since
//! simulated histograms drop trailing empty levels.

use std::fmt;
use std::path::Path;

use stickysim_core::dist::total_variation;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Reads column `i` and the requested value column (or the default: `p`,
/// else the first column whose name starts with `p_`).
pub fn read_pmf(path: &Path, column: Option<&str>) -> Result<Column> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let shape = |msg: String| CliError::invalid(format!("{}: {msg}", path.display()));
    let idx_col = headers
        .iter()
        .position(|h| h == "i")
        .ok_or_else(|| shape("no `i` column".into()))?;
    let val_col = match column {
        Some(c) => headers.iter().position(|h| h == c),
        None => headers
            .iter()
            .position(|h| h == "p")
            .or_else(|| headers.iter().position(|h| h.starts_with("p_"))),
    }
    .ok_or_else(|| {
        shape(format!(
            "no probability column ({})",
            column.unwrap_or("p or p_*")
        ))
    })?;

    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let i: usize = record[idx_col]
            .trim()
            .parse()
            .map_err(|_| shape(format!("row {row}: bad index `{}`", &record[idx_col])))?;
        if i != row {
            return Err(shape(format!(
                "index column is not 0,1,2,... (row {row} has i={i})"
            )));
        }
        let v: f64 = record[val_col]
            .trim()
            .parse()
            .map_err(|_| shape(format!("row {row}: bad value `{}`", &record[val_col])))?;
        if !v.is_finite() || v < 0.0 {
            return Err(shape(format!("row {row}: value {v} is not a probability")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(shape("no rows".into()));
    }
    Ok(Column {
        name: headers[val_col].to_string(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub column_a: String,
    pub column_b: String,
    pub rows_a: usize,
    pub rows_b: usize,
    pub tv: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub tol: f64,
}

impl Report {
    pub fn mean_gap(&self) -> f64 {
        self.mean_b - self.mean_a
    }

    pub fn passed(&self) -> bool {
        self.tv <= self.tol
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "a: {} ({} rows, mean {:.6})",
            self.column_a, self.rows_a, self.mean_a
        )?;
        writeln!(
            f,
            "b: {} ({} rows, mean {:.6})",
            self.column_b, self.rows_b, self.mean_b
        )?;
        writeln!(
            f,
            "tv {:.6e}  mean gap {:+.6}  tol {:e}",
            self.tv,
            self.mean_gap(),
            self.tol
        )?;
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn mean(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    p.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / total
}

pub fn compare_columns(a: &Column, b: &Column, tol: f64) -> Result<Report> {
    if !(tol >= 0.0) {
        return Err(CliError::invalid("tolerance must be non-negative"));
    }
    for c in [a, b] {
        let total: f64 = c.values.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(CliError::invalid(format!(
                "column `{}` sums to {total}, not 1",
                c.name
            )));
        }
    }
    Ok(Report {
        column_a: a.name.clone(),
        column_b: b.name.clone(),
        rows_a: a.values.len(),
        rows_b: b.values.len(),
        tv: total_variation(&a.values, &b.values),
        mean_a: mean(&a.values),
        mean_b: mean(&b.values),
        tol,
    })
}

pub fn compare_files(
    a: &Path,
    b: &Path,
    tol: f64,
    col_a: Option<&str>,
    col_b: Option<&str>,
) -> Result<Report> {
    compare_columns(&read_pmf(a, col_a)?, &read_pmf(b, col_b)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Column {
        Column {
            name: "p".into(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn identical_columns_pass() {
        let r = compare_columns(&col(&[0.25, 0.75]), &col(&[0.25, 0.75]), 0.0).unwrap();
        assert_eq!(r.tv, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn padding_and_mean_gap() {
        let r = compare_columns(&col(&[1.0]), &col(&[0.0, 0.5, 0.5]), 0.1).unwrap();
        assert!((r.tv - 1.0).abs() < 1e-15);
        assert!((r.mean_gap() - 1.5).abs() < 1e-15);
        assert!(!r.passed());
    }

    #[test]
    fn unnormalized_column_rejected() {
        assert!(compare_columns(&col(&[0.5]), &col(&[1.0]), 0.1).is_err());
    }
}
