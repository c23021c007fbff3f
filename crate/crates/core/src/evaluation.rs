//! Performance measures and leave-one-out cross-validation.

use rayon::prelude::*;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::TsModel;
use crate::pipeline::{identify, PipelineConfig};

fn check_lengths(observed: &[f64], predicted: &[f64], min: usize) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} observed vs {} predicted values",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.len() < min {
        return Err(Error::Shape(format!(
            "need at least {min} values, got {}",
            observed.len()
        )));
    }
    Ok(())
}

/// `sqrt(sum (y - y_pred)^2 / n)`
pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(observed, predicted, 1)?;
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok((sse / observed.len() as f64).sqrt())
}

/// `1 - sum (y - y_pred)^2 / sum (y - mean(y))^2`; negative when the
/// predictions are worse than the mean.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(observed, predicted, 2)?;
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let sst: f64 = observed.iter().map(|y| (y - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::UndefinedVariance);
    }
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub train_r2: f64,
    pub test_r2: f64,
}

/// Fit quality of a model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rmse: f64,
    /// `None` when the observed activity is constant.
    pub r_squared: Option<f64>,
    pub predictions: Vec<f64>,
    /// observed - predicted, per row.
    pub residuals: Vec<f64>,
}

/// Predicts every row of a raw dataset and scores the result. Columns are
/// matched by name, so the dataset may carry extra columns.
pub fn evaluate(model: &TsModel, dataset: &Dataset) -> Result<Evaluation> {
    let inputs = if dataset.column_names() == model.input_names() {
        dataset.descriptors().clone()
    } else {
        dataset.select_columns(model.input_names())?.descriptors().clone()
    };
    let predictions: Vec<f64> = model.predict_batch(&inputs)?.iter().copied().collect();
    let observed = dataset.activity().as_slice();
    let residuals = observed.iter().zip(&predictions).map(|(y, p)| y - p).collect();
    let r2 = match r_squared(observed, &predictions) {
        Ok(v) => Some(v),
        Err(Error::UndefinedVariance) | Err(Error::Shape(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        rmse: rmse(observed, &predictions)?,
        r_squared: r2,
        predictions,
        residuals,
    })
}

/// What happened in one leave-one-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldDiagnostics {
    /// Index of the held-out row.
    pub held_out: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub reseeded_clusters: usize,
    /// Centering computed on the fold's training rows.
    pub descriptor_means: Vec<f64>,
    pub activity_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub metrics: Metrics,
    /// `(observed, predicted)` for each held-out row, in row order.
    pub pooled_predictions: Vec<(f64, f64)>,
    /// Fitted values of the all-data model, in row order.
    pub train_predictions: Vec<f64>,
    pub folds: Vec<FoldDiagnostics>,
    pub train_converged: bool,
}

impl CrossValReport {
    pub fn unconverged_folds(&self) -> impl Iterator<Item = &FoldDiagnostics> {
        self.folds.iter().filter(|f| !f.converged)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of fold `fold` derived from the master seed.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    splitmix64(master ^ splitmix64(fold as u64 + 1))
}

/// Leave-one-out cross-validation of the whole identification pipeline.
///
/// Each fold re-centers, re-clusters and (if configured) re-selects on its
/// N-1 training rows before predicting the held-out row. Test metrics pool
/// the N held-out predictions; train metrics come from a fit on all rows
/// with the master seed. Folds run in parallel; the report does not depend
/// on scheduling.
pub fn loo_crossval(dataset: &Dataset, config: &PipelineConfig) -> Result<CrossValReport> {
    if dataset.is_centered() {
        return Err(Error::State("cross-validation expects uncentered data".into()));
    }
    let n = dataset.len();
    let c = config.clustering.cluster_count;
    if n < c + 2 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out with {c} clusters needs at least {} samples, got {n}",
            c + 2
        )));
    }
    config.clustering.validate()?;
    config.selection.validate(dataset.width())?;

    let folds = (0..n)
        .into_par_iter()
        .map(|k| {
            let train = dataset.without_row(k)?;
            let mut fold_config = config.clone();
            fold_config.clustering.seed = fold_seed(config.clustering.seed, k);
            let fit = identify(&train, &fold_config)?;
            let row: Vec<f64> = fit
                .model
                .input_names()
                .iter()
                .map(|name| dataset.descriptors()[(k, dataset.column_index(name).expect("model column"))])
                .collect();
            let predicted = fit.model.predict(&row)?.value;
            let centering = fit.model.centering();
            let diag = FoldDiagnostics {
                held_out: k,
                seed: fold_config.clustering.seed,
                converged: fit.clustering.converged
                    && fit.screening.as_ref().is_none_or(|s| s.converged),
                iterations: fit.clustering.iterations,
                reseeded_clusters: fit.clustering.diagnostics.reseeded.len(),
                descriptor_means: centering.descriptor_means.clone(),
                activity_mean: centering.activity_mean,
            };
            Ok((predicted, diag))
        })
        .collect::<Result<Vec<_>>>()?;

    let observed = dataset.activity().as_slice();
    let test_predicted: Vec<f64> = folds.iter().map(|(p, _)| *p).collect();
    let full = identify(dataset, config)?;
    let train = evaluate(&full.model, dataset)?;

    let metrics = Metrics {
        train_rmse: train.rmse,
        test_rmse: rmse(observed, &test_predicted)?,
        train_r2: r_squared(observed, &train.predictions)?,
        test_r2: r_squared(observed, &test_predicted)?,
    };
    Ok(CrossValReport {
        metrics,
        pooled_predictions: observed.iter().copied().zip(test_predicted).collect(),
        train_predictions: train.predictions,
        folds: folds.into_iter().map(|(_, d)| d).collect(),
        train_converged: full.clustering.converged,
    })
}
