//! CSV ingestion.
//!
//! The dialect is fixed: comma separated, mandatory header row, `.` as the
//! decimal mark, no locale handling. Every cell of every used column must parse
//! as a finite number; 0/1 indicator columns are ordinary numbers.

use std::path::Path;

use nalgebra::DMatrix;

use super::CliError;
use crate::plm::Dataset;

/// A numeric table read from CSV.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    /// Column-major values, one vector per header.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("column '{name}' not found in the input header")))
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        Ok(&self.columns[self.column_index(name)?])
    }
}

/// Reads a CSV file, parsing only the columns named in `wanted` (all columns
/// when `wanted` is `None`). Unused columns may hold arbitrary text.
pub fn read_table(path: &Path, wanted: Option<&[String]>) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("cannot read header of {}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::input(format!("{} has an empty header row", path.display())));
    }
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(CliError::input(format!("duplicate column name '{h}' in the input header")));
        }
    }

    let selected: Vec<usize> = match wanted {
        None => (0..headers.len()).collect(),
        Some(names) => {
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                let i = headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::input(format!("column '{name}' not found in the input header")))?;
                idx.push(i);
            }
            idx
        }
    };

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); selected.len()];
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("malformed CSV in {}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        for (slot, &i) in selected.iter().enumerate() {
            let cell = record.get(i).unwrap_or("").trim();
            let value: f64 = cell.parse().map_err(|_| {
                CliError::input(format!(
                    "line {line}, column '{}': cannot parse '{cell}' as a number",
                    headers[i]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::input(format!(
                    "line {line}, column '{}': value '{cell}' is not finite",
                    headers[i]
                )));
            }
            columns[slot].push(value);
        }
    }
    Ok(Table {
        headers: selected.iter().map(|&i| headers[i].clone()).collect(),
        columns,
    })
}

/// Reads a dataset: `response` is `Y`, `nonparam` is `T`, and every other
/// column not listed in `exclude` enters `X` in header order.
pub fn read_dataset(path: &Path, response: &str, nonparam: &str, exclude: &[String]) -> Result<Dataset, CliError> {
    let header = read_header(path)?;
    for name in std::iter::once(response).chain(std::iter::once(nonparam)).chain(exclude.iter().map(String::as_str)) {
        if !header.iter().any(|h| h == name) {
            return Err(CliError::input(format!("column '{name}' not found in the input header")));
        }
    }
    if response == nonparam {
        return Err(CliError::input(format!(
            "column '{response}' cannot be both the response and the nonparametric covariate"
        )));
    }
    let design_names: Vec<String> = header
        .iter()
        .filter(|h| h.as_str() != response && h.as_str() != nonparam && !exclude.contains(h))
        .cloned()
        .collect();
    if design_names.is_empty() {
        return Err(CliError::input("no columns left for the linear part after exclusions".to_string()));
    }
    let mut wanted = vec![response.to_string(), nonparam.to_string()];
    wanted.extend(design_names.iter().cloned());
    let table = read_table(path, Some(&wanted))?;
    let n = table.nrows();
    if n == 0 {
        return Err(CliError::input(format!("{} has no data rows", path.display())));
    }
    let p = design_names.len();
    let design = DMatrix::from_fn(n, p, |i, j| table.columns[2 + j][i]);
    Dataset::new(table.columns[0].clone(), design, table.columns[1].clone(), design_names).map_err(CliError::from)
}

fn read_header(path: &Path) -> Result<Vec<String>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("cannot read header of {}: {e}", path.display())))?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}
