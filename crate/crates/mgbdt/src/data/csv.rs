//! CSV ingestion: schema inference, one-hot encoding, and re-encoding of new
//! files through a previously inferred schema.
//!
//! Cells are trimmed; empty cells and `?` count as missing and drop the row.
//! Any column whose non-missing cells all parse as numbers is numeric; the
//! rest are one-hot encoded with categories in first-appearance order.

use std::path::Path;

use crate::data::{ColumnKind, ColumnSpec, Dataset, LabelColumn, Labels, Schema};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Whether the label column holds class names or numeric targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    Classes,
    Numeric,
}

/// Side facts about an ingestion worth surfacing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Rows dropped because a relevant cell was missing.
    pub rows_dropped: usize,
    /// Cells whose category was unseen at training time (encoded all-zero).
    pub unseen_category_cells: usize,
    /// Label values unseen at training time (mapped past the trained classes).
    pub unseen_label_values: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((headers, rows))
}

fn csv_error(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// Read a training file: infer the schema, then encode through it.
pub fn load_csv(
    path: &Path,
    label: Option<(&str, LabelKind)>,
    forced_categorical: &[String],
) -> Result<(Dataset, LoadReport)> {
    let (headers, rows) = read_records(path)?;
    let schema = infer_schema(&headers, &rows, label, forced_categorical)?;
    let (dataset, report) = encode(&headers, &rows, &schema)?;
    Ok((dataset, report))
}

/// Read a file through an existing schema (test or prediction data).
pub fn load_csv_with_schema(path: &Path, schema: &Schema) -> Result<(Dataset, LoadReport)> {
    let (headers, rows) = read_records(path)?;
    encode(&headers, &rows, schema)
}

fn infer_schema(
    headers: &[String],
    rows: &[Vec<String>],
    label: Option<(&str, LabelKind)>,
    forced_categorical: &[String],
) -> Result<Schema> {
    let column_index = |name: &str| headers.iter().position(|h| h == name);
    for forced in forced_categorical {
        if column_index(forced).is_none() {
            return Err(Error::SchemaMismatch(format!(
                "categorical column `{forced}` not present in the file"
            )));
        }
    }
    let label_index = match label {
        None => None,
        Some((name, kind)) => match column_index(name) {
            None => return Err(Error::UnknownLabelColumn(name.to_string())),
            Some(idx) => Some((idx, kind)),
        },
    };

    let mut columns = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if label_index.is_some_and(|(l, _)| l == idx) {
            continue;
        }
        let forced = forced_categorical.iter().any(|f| f == name);
        let numeric = !forced
            && rows.iter().all(|row| {
                let cell = row.get(idx).map(String::as_str).unwrap_or("");
                is_missing(cell) || cell.parse::<f64>().is_ok_and(f64::is_finite)
            });
        let kind = if numeric {
            ColumnKind::Numeric
        } else {
            let mut categories: Vec<String> = Vec::new();
            for row in rows {
                let cell = row.get(idx).map(String::as_str).unwrap_or("");
                if !is_missing(cell) && !categories.iter().any(|c| c == cell) {
                    categories.push(cell.to_string());
                }
            }
            ColumnKind::Categorical { categories }
        };
        columns.push(ColumnSpec {
            name: name.clone(),
            kind,
        });
    }

    let label = match label_index {
        None => None,
        Some((idx, LabelKind::Numeric)) => Some(LabelColumn::Numeric {
            name: headers[idx].clone(),
        }),
        Some((idx, LabelKind::Classes)) => {
            let mut classes: Vec<String> = Vec::new();
            for row in rows {
                let cell = row.get(idx).map(String::as_str).unwrap_or("");
                if !is_missing(cell) && !classes.iter().any(|c| c == cell) {
                    classes.push(cell.to_string());
                }
            }
            Some(LabelColumn::Classes {
                name: headers[idx].clone(),
                classes,
            })
        }
    };

    Ok(Schema { columns, label })
}

fn encode(
    headers: &[String],
    rows: &[Vec<String>],
    schema: &Schema,
) -> Result<(Dataset, LoadReport)> {
    // Every schema column (and the label) must be present by name.
    let mut missing: Vec<&str> = Vec::new();
    let mut col_index = Vec::with_capacity(schema.columns.len());
    for spec in &schema.columns {
        match headers.iter().position(|h| h == &spec.name) {
            Some(idx) => col_index.push(idx),
            None => missing.push(&spec.name),
        }
    }
    let label_name = match &schema.label {
        Some(LabelColumn::Classes { name, .. }) | Some(LabelColumn::Numeric { name }) => {
            Some(name.as_str())
        }
        None => None,
    };
    let label_index = match label_name {
        None => None,
        Some(name) => match headers.iter().position(|h| h == name) {
            Some(idx) => Some(idx),
            None => {
                missing.push(name);
                None
            }
        },
    };
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "file is missing the column(s): {}",
            missing.join(", ")
        )));
    }

    let width = schema.feature_width();
    let mut report = LoadReport::default();
    let mut data: Vec<f64> = Vec::new();
    let mut class_labels: Vec<usize> = Vec::new();
    let mut value_labels: Vec<f64> = Vec::new();
    // Labels unseen at training time get fresh indices past the known ones,
    // so they exist (and count as mispredictions) without corrupting classes.
    let mut extra_labels: Vec<String> = Vec::new();

    'rows: for (row_number, row) in rows.iter().enumerate() {
        let cell_at = |idx: usize| row.get(idx).map(String::as_str).unwrap_or("");
        // A missing relevant cell drops the whole row.
        for &idx in &col_index {
            if is_missing(cell_at(idx)) {
                report.rows_dropped += 1;
                continue 'rows;
            }
        }
        if let Some(idx) = label_index {
            if is_missing(cell_at(idx)) {
                report.rows_dropped += 1;
                continue 'rows;
            }
        }

        let mut encoded = Vec::with_capacity(width);
        for (spec, &idx) in schema.columns.iter().zip(&col_index) {
            let cell = cell_at(idx);
            match &spec.kind {
                ColumnKind::Numeric => {
                    let value: f64 = cell.parse().map_err(|_| Error::NumericParse {
                        row: row_number + 1,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !value.is_finite() {
                        return Err(Error::NonFiniteInput);
                    }
                    encoded.push(value);
                }
                ColumnKind::Categorical { categories } => {
                    let start = encoded.len();
                    encoded.resize(start + categories.len(), 0.0);
                    match categories.iter().position(|c| c == cell) {
                        Some(pos) => encoded[start + pos] = 1.0,
                        None => report.unseen_category_cells += 1,
                    }
                }
            }
        }
        data.extend_from_slice(&encoded);

        match (&schema.label, label_index) {
            (Some(LabelColumn::Classes { classes, .. }), Some(idx)) => {
                let cell = cell_at(idx);
                let position = classes
                    .iter()
                    .position(|c| c == cell)
                    // UCI test files write labels with a trailing period.
                    .or_else(|| classes.iter().position(|c| c == cell.trim_end_matches('.')));
                let class = match position {
                    Some(p) => p,
                    None => {
                        report.unseen_label_values += 1;
                        let extra = match extra_labels.iter().position(|c| c == cell) {
                            Some(p) => p,
                            None => {
                                extra_labels.push(cell.to_string());
                                extra_labels.len() - 1
                            }
                        };
                        classes.len() + extra
                    }
                };
                class_labels.push(class);
            }
            (Some(LabelColumn::Numeric { name }), Some(idx)) => {
                let cell = cell_at(idx);
                let value: f64 = cell.parse().map_err(|_| Error::NumericParse {
                    row: row_number + 1,
                    column: name.clone(),
                    value: cell.to_string(),
                })?;
                value_labels.push(value);
            }
            _ => {}
        }
    }

    let rows_kept = data.len() / width.max(1);
    let labels = match &schema.label {
        Some(LabelColumn::Classes { .. }) => Labels::Classes(class_labels),
        Some(LabelColumn::Numeric { .. }) => {
            Labels::Values(Matrix::from_vec(rows_kept, 1, value_labels))
        }
        None => Labels::None,
    };
    Ok((
        Dataset {
            features: Matrix::from_vec(rows_kept, width, data),
            labels,
            schema: schema.clone(),
        },
        report,
    ))
}
