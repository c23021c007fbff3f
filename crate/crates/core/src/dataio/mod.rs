//! Descriptor/activity tables: loading, mean-centering, persistence and
//! synthetic benchmark generation.

mod benchmark;
mod export;
mod model_file;

pub use benchmark::{generate_benchmark, BenchmarkKind, BenchmarkTruth, Regime};
pub use export::{
    write_predictions, write_scatter, write_selection_report, ScatterRow, SelectionRow, Split,
};
pub use model_file::{load_model, read_model, save_model, write_model, ModelFile, Provenance, SCHEMA_VERSION};

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Means removed from the descriptors and the activity by [`Dataset::mean_center`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub descriptor_means: Vec<f64>,
    pub activity_mean: f64,
}

impl Centering {
    /// Centering that leaves data untouched.
    pub fn identity(width: usize) -> Self {
        Centering {
            descriptor_means: vec![0.0; width],
            activity_mean: 0.0,
        }
    }
}

/// Which CSV column holds the activity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ActivityColumn {
    #[default]
    Last,
    Named(String),
}

/// N samples in rows, k descriptors in columns, plus one activity per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    descriptors: DMatrix<f64>,
    activity: DVector<f64>,
    column_names: Vec<String>,
    centering: Option<Centering>,
}

impl Dataset {
    pub fn new(
        descriptors: DMatrix<f64>,
        activity: DVector<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if descriptors.nrows() == 0 {
            return Err(Error::EmptyDataset("no samples".into()));
        }
        if descriptors.ncols() == 0 {
            return Err(Error::EmptyDataset("no descriptor columns".into()));
        }
        if activity.len() != descriptors.nrows() {
            return Err(Error::Shape(format!(
                "{} activity values for {} descriptor rows",
                activity.len(),
                descriptors.nrows()
            )));
        }
        if column_names.len() != descriptors.ncols() {
            return Err(Error::Shape(format!(
                "{} column names for {} descriptor columns",
                column_names.len(),
                descriptors.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if descriptors.iter().chain(activity.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value in dataset".into()));
        }
        Ok(Dataset {
            descriptors,
            activity,
            column_names,
            centering: None,
        })
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.descriptors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of descriptor columns k.
    pub fn width(&self) -> usize {
        self.descriptors.ncols()
    }

    pub fn descriptors(&self) -> &DMatrix<f64> {
        &self.descriptors
    }

    pub fn activity(&self) -> &DVector<f64> {
        &self.activity
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_centered(&self) -> bool {
        self.centering.is_some()
    }

    pub fn centering(&self) -> Option<&Centering> {
        self.centering.as_ref()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    /// Subtracts each descriptor column mean and the activity mean.
    pub fn mean_center(&self) -> Result<Dataset> {
        if self.centering.is_some() {
            return Err(Error::State("dataset is already mean-centered".into()));
        }
        let n = self.len() as f64;
        let descriptor_means: Vec<f64> = self
            .descriptors
            .column_iter()
            .map(|col| col.sum() / n)
            .collect();
        let activity_mean = self.activity.sum() / n;

        let mut descriptors = self.descriptors.clone();
        for (j, mean) in descriptor_means.iter().enumerate() {
            descriptors.column_mut(j).add_scalar_mut(-mean);
        }
        let activity = self.activity.add_scalar(-activity_mean);
        Ok(Dataset {
            descriptors,
            activity,
            column_names: self.column_names.clone(),
            centering: Some(Centering {
                descriptor_means,
                activity_mean,
            }),
        })
    }

    /// Keeps the given rows, in the given order. Centering metadata is dropped
    /// only if the source was uncentered; subsets of centered data keep it.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("row selection is empty".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::Shape(format!(
                "row {bad} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Dataset {
            descriptors: self.descriptors.select_rows(rows),
            activity: self.activity.select_rows(rows),
            column_names: self.column_names.clone(),
            centering: self.centering.clone(),
        })
    }

    /// All rows except `row`.
    pub fn without_row(&self, row: usize) -> Result<Dataset> {
        let rows: Vec<usize> = (0..self.len()).filter(|&r| r != row).collect();
        self.select_rows(&rows)
    }

    /// Keeps the named columns in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Dataset> {
        let indices = names
            .iter()
            .map(|name| {
                self.column_index(name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.centering.is_some() {
            return Err(Error::State(
                "column selection is only supported on uncentered data".into(),
            ));
        }
        Dataset::new(
            self.descriptors.select_columns(&indices),
            self.activity.clone(),
            names.to_vec(),
        )
    }

    /// Writes the dataset as CSV with the activity as the last column.
    pub fn write_csv<W: Write>(&self, writer: W, activity_name: &str) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = self.column_names.clone();
        header.push(activity_name.to_string());
        out.write_record(&header)?;
        for (r, row) in self.descriptors.row_iter().enumerate() {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(self.activity[r].to_string());
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Loads a CSV file with a header row. All cells must be finite decimals.
pub fn load_csv(path: impl AsRef<Path>, activity: &ActivityColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, activity)
}

/// Same as [`load_csv`] but reads from any reader. Row numbers in errors
/// count data rows from 1 (the header is not counted).
pub fn read_csv<R: Read>(reader: R, activity: &ActivityColumn) -> Result<Dataset> {
    let (header, table) = read_table(reader)?;
    if header.len() < 2 {
        return Err(Error::EmptyDataset(
            "need at least one descriptor column and one activity column".into(),
        ));
    }
    let activity_index = match activity {
        ActivityColumn::Last => header.len() - 1,
        ActivityColumn::Named(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?,
    };
    let descriptor_indices: Vec<usize> = (0..header.len()).filter(|&j| j != activity_index).collect();
    let names = descriptor_indices.iter().map(|&j| header[j].clone()).collect();
    Dataset::new(
        table.select_columns(&descriptor_indices),
        table.column(activity_index).into_owned(),
        names,
    )
}

/// Header plus an all-numeric body, without designating an activity column.
pub fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyDataset("missing header".into()));
    }
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        for (cell, name) in record.iter().zip(&header) {
            values.push(parse_cell(cell).ok_or_else(|| Error::Parse {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset("no data rows after header".into()));
    }
    Ok((header.clone(), DMatrix::from_row_slice(rows, header.len(), &values)))
}

/// [`read_table`] on a file.
pub fn load_table(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file)
}

/// Accepts plain decimal notation only: digits, one '.', optional sign and
/// exponent. Rejects locale variants such as "1,5" as well as NaN/inf.
fn parse_cell(cell: &str) -> Option<f64> {
    let ok = !cell.is_empty()
        && cell
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if !ok {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}
