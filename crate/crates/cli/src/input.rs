//! CSV ingestion: comma-separated, header row, `.` decimal point.

use std::fs::File;
use std::path::{Path, PathBuf};

use permreg::Dataset;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("input file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: value `{value}` is not numeric")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("column `{column}` has more than two labels (third label `{label}` at row {row})")]
    TooManyLabels { row: usize, column: String, label: String },
    #[error("every row has a missing value in a named column")]
    AllRowsDropped,
    #[error("row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] permreg::Error),
}

/// Column names to read from the CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnSpec {
    pub response: String,
    pub covariate: String,
    pub treatment: String,
    pub family: Option<String>,
}

/// A string treatment label and the value it was coded as.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCode {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedData {
    pub dataset: Dataset,
    /// Rows skipped because a named column was empty or `NA`.
    pub dropped_rows: usize,
    /// Present when the treatment column held string labels.
    pub treatment_coding: Option<Vec<LabelCode>>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

fn numeric(values: &[(usize, &str)], column: &str) -> Result<Vec<f64>, InputError> {
    values
        .iter()
        .map(|&(row, v)| {
            v.parse::<f64>().map_err(|_| InputError::NonNumeric {
                row,
                column: column.to_string(),
                value: v.to_string(),
            })
        })
        .collect()
}

/// Numeric treatment values are used as given. Otherwise the column must hold
/// exactly two labels, coded 0 and 1 in order of first appearance.
fn treatment(values: &[(usize, &str)], column: &str) -> Result<(Vec<f64>, Option<Vec<LabelCode>>), InputError> {
    if values.iter().all(|(_, v)| v.parse::<f64>().is_ok()) {
        return Ok((numeric(values, column)?, None));
    }
    let mut labels: Vec<&str> = Vec::new();
    let mut coded = Vec::with_capacity(values.len());
    for &(row, v) in values {
        let code = match labels.iter().position(|l| *l == v) {
            Some(i) => i,
            None if labels.len() < 2 => {
                labels.push(v);
                labels.len() - 1
            }
            None => {
                return Err(InputError::TooManyLabels {
                    row,
                    column: column.to_string(),
                    label: v.to_string(),
                })
            }
        };
        coded.push(code as f64);
    }
    let coding = labels
        .iter()
        .enumerate()
        .map(|(i, l)| LabelCode {
            label: l.to_string(),
            value: i as f64,
        })
        .collect();
    Ok((coded, Some(coding)))
}

/// Reads the named columns from `path`. Row numbers in errors count data
/// rows from 1, excluding the header.
pub fn parse_dataset(path: &Path, columns: &ColumnSpec) -> Result<ParsedData, InputError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => InputError::FileNotFound(path.to_path_buf()),
        _ => InputError::Io(e),
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| InputError::Csv { row: 0, source: e })?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| InputError::MissingColumn(name.to_string()))
    };
    let mut names = vec![&columns.response, &columns.covariate, &columns.treatment];
    names.extend(columns.family.as_ref());
    let idx = names.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;

    let records = reader
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| InputError::Csv { row: i + 1, source: e }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut kept = Vec::new();
    let mut dropped_rows = 0;
    for (i, rec) in records.iter().enumerate() {
        let cells: Vec<&str> = idx.iter().map(|&j| rec.get(j).unwrap_or("")).collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped_rows += 1;
        } else {
            kept.push((i + 1, cells));
        }
    }
    if kept.is_empty() {
        return Err(InputError::AllRowsDropped);
    }

    let col = |k: usize| kept.iter().map(|(row, c)| (*row, c[k])).collect::<Vec<_>>();
    let y = numeric(&col(0), &columns.response)?;
    let x1 = numeric(&col(1), &columns.covariate)?;
    let (x2, treatment_coding) = treatment(&col(2), &columns.treatment)?;
    let mut dataset = Dataset::new(y, x1, x2)?;
    if columns.family.is_some() {
        dataset = dataset.with_families(col(3).into_iter().map(|(_, v)| v.to_string()).collect())?;
    }
    Ok(ParsedData {
        dataset,
        dropped_rows,
        treatment_coding,
    })
}
