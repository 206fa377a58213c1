//! File formats for spaces and maps.
//!
//! Spaces are read from CSV (`n` rows of `n` decimals, optionally preceded by
//! a header row of labels) or JSON (`{"labels": [...], "dist": [[...]]}`).
//! Maps are JSON `{"pairing": [j0, j1, ...]}`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::metric::{FiniteMetricSpace, MetricError, SpaceRecord};
use crate::quasisym::MapRecord;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl FormatError {
    /// True when the input parsed but violates the metric axioms.
    pub fn is_metric_violation(&self) -> bool {
        matches!(
            self,
            FormatError::Metric(e) if !matches!(e, MetricError::NotSquare { .. } | MetricError::LabelCount { .. })
        )
    }
}

/// Raw parsed matrix, before any metric validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix<T> {
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<T>>,
}

pub fn parse_csv_matrix<T: Scalar>(text: &str) -> Result<RawMatrix<T>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FormatError::Csv(e.to_string()))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values.into_iter().map(T::lit).collect()),
            Err(_) if i == 0 => labels = Some(record.iter().map(str::to_owned).collect()),
            Err(e) => return Err(FormatError::Csv(format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(FormatError::Csv("no numeric rows".into()));
    }
    Ok(RawMatrix { labels, rows })
}

pub fn parse_json_matrix<T: Scalar>(text: &str) -> Result<RawMatrix<T>, FormatError> {
    let record: SpaceRecord<T> = serde_json::from_str(text)?;
    let labels = if record.labels.is_empty() {
        None
    } else {
        Some(record.labels)
    };
    Ok(RawMatrix {
        labels,
        rows: record.dist,
    })
}

/// Parses either format; JSON is recognised by a leading `{`.
pub fn parse_matrix<T: Scalar>(text: &str) -> Result<RawMatrix<T>, FormatError> {
    if text.trim_start().starts_with('{') {
        parse_json_matrix(text)
    } else {
        parse_csv_matrix(text)
    }
}

pub fn read_space<T: Scalar>(path: &Path, tol: T) -> Result<FiniteMetricSpace<T>, FormatError> {
    let raw = parse_matrix(&read_text(path)?)?;
    Ok(crate::metric::validate_metric(&raw.rows, raw.labels, tol)?)
}

pub fn read_map(path: &Path) -> Result<MapRecord, FormatError> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// CSV with a label header row.
pub fn space_to_csv<T: Scalar>(space: &FiniteMetricSpace<T>) -> String {
    let mut out = space.labels().join(",");
    out.push('\n');
    for row in space.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn space_to_json<T: Scalar>(space: &FiniteMetricSpace<T>) -> String {
    serde_json::to_string(&space.to_record()).expect("space record serializes")
}
