//! Delimited-text exports for selection reports, scatter data and predictions.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub observed: f64,
    pub predicted: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    /// "consequent" or "antecedent".
    pub stage: String,
    pub rank: usize,
    pub name: String,
    pub score: f64,
    pub kept: bool,
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// Header `observed,predicted,split`.
pub fn write_scatter<W: Write>(writer: W, rows: &[ScatterRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["observed", "predicted", "split"])?;
    for row in rows {
        out.write_record([
            row.observed.to_string(),
            row.predicted.to_string(),
            row.split.as_str().to_string(),
        ])?;
    }
    finish(out)
}

/// Header `stage,rank,name,score,kept`.
pub fn write_selection_report<W: Write>(writer: W, rows: &[SelectionRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["stage", "rank", "name", "score", "kept"])?;
    for row in rows {
        out.write_record([
            row.stage.clone(),
            row.rank.to_string(),
            row.name.clone(),
            row.score.to_string(),
            row.kept.to_string(),
        ])?;
    }
    finish(out)
}

/// Header `row,predicted`; rows count from 1.
pub fn write_predictions<W: Write>(writer: W, predictions: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["row", "predicted"])?;
    for (i, p) in predictions.iter().enumerate() {
        out.write_record([(i + 1).to_string(), p.to_string()])?;
    }
    finish(out)
}
