//! Center, cluster, optionally reduce, and assemble a [`TsModel`].

use crate::clustering::{cluster, ClusteringConfig, ClusteringResult, ColumnRoles};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::TsModel;
use crate::selection::{rank_antecedents, rank_consequents, SelectionReport};

/// Reduction targets. `None` keeps every column in that role; selection
/// runs when either target is set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionConfig {
    pub keep_antecedent: Option<usize>,
    pub keep_consequent: Option<usize>,
}

impl SelectionConfig {
    pub fn is_active(&self) -> bool {
        self.keep_antecedent.is_some() || self.keep_consequent.is_some()
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if let Some(k) = self.keep_antecedent {
            if k < 1 || k > width {
                return Err(Error::InvalidConfig(format!(
                    "keep-antecedent must be in 1..={width}, got {k}"
                )));
            }
        }
        if let Some(k) = self.keep_consequent {
            if k > width {
                return Err(Error::InvalidConfig(format!(
                    "keep-consequent must be in 0..={width}, got {k}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub clustering: ClusteringConfig,
    pub selection: SelectionConfig,
    /// Replace every trained rule weight by 1 in the returned model.
    pub unit_weights: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identified {
    pub model: TsModel,
    /// Clustering behind `model`.
    pub clustering: ClusteringResult,
    /// Clustering over all columns that drove the selection, when it ran.
    pub screening: Option<ClusteringResult>,
    pub selection: Option<SelectionReport>,
    /// The centered training data.
    pub centered: Dataset,
}

/// Runs the whole identification on raw (uncentered) data. Every column is
/// first used both as antecedent and as consequent. With selection active,
/// consequents are ranked by error-reduction ratio, antecedents are
/// eliminated by interclass separability, and the model is re-clustered on
/// the kept columns, and the returned model only lists the columns it reads.
pub fn identify(raw: &Dataset, config: &PipelineConfig) -> Result<Identified> {
    config.clustering.validate()?;
    config.selection.validate(raw.width())?;
    let centered = if raw.is_centered() {
        raw.clone()
    } else {
        raw.mean_center()?
    };
    let centering = centered.centering().expect("centered").clone();
    let all = ColumnRoles::all(raw.width());
    let screening = cluster(&centered, &config.clustering, &all)?;

    let (clustering, screening, selection) = if config.selection.is_active() {
        let consequent = rank_consequents(
            centered.descriptors(),
            centered.activity(),
            &screening,
            config.clustering.fuzziness,
        )?;
        let antecedent = rank_antecedents(
            &screening.prototypes,
            &all.antecedent,
            config.selection.keep_antecedent.unwrap_or(raw.width()),
        )?;
        let mut kept_consequents: Vec<usize> = consequent
            .aggregate_order
            .iter()
            .copied()
            .take(config.selection.keep_consequent.unwrap_or(raw.width()))
            .collect();
        kept_consequents.sort_unstable();
        let mut kept_antecedents = antecedent.kept.clone();
        kept_antecedents.sort_unstable();
        let roles = ColumnRoles {
            antecedent: kept_antecedents.clone(),
            consequent: kept_consequents.clone(),
        };
        let reduced = cluster(&centered, &config.clustering, &roles)?;
        let report = SelectionReport {
            consequent,
            antecedent,
            kept_consequents,
            kept_antecedents,
        };
        (reduced, Some(screening), Some(report))
    } else {
        (screening, None, None)
    };

    let mut model = clustering.to_ts_model(raw.column_names(), &centering)?;
    if selection.is_some() {
        model = model.compact();
    }
    if config.unit_weights {
        model = model.with_unit_weights();
    }
    Ok(Identified {
        model,
        clustering,
        screening,
        selection,
        centered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_benchmark, BenchmarkKind};

    #[test]
    fn keep_counts_are_validated() {
        let (ds, _) = generate_benchmark(BenchmarkKind::IrrelevantDescriptor, 30, 0.05, 1).unwrap();
        for selection in [
            SelectionConfig { keep_antecedent: Some(3), keep_consequent: None },
            SelectionConfig { keep_antecedent: Some(0), keep_consequent: None },
            SelectionConfig { keep_antecedent: None, keep_consequent: Some(3) },
        ] {
            let cfg = PipelineConfig { selection, ..Default::default() };
            assert!(matches!(identify(&ds, &cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn full_consequent_keep_drops_nothing() {
        let (ds, _) = generate_benchmark(BenchmarkKind::IrrelevantDescriptor, 60, 0.05, 2).unwrap();
        let cfg = PipelineConfig {
            selection: SelectionConfig { keep_antecedent: None, keep_consequent: Some(2) },
            ..Default::default()
        };
        let out = identify(&ds, &cfg).unwrap();
        let report = out.selection.unwrap();
        assert_eq!(report.kept_consequents, vec![0, 1]);
        assert_eq!(report.consequent.aggregate_order.len(), 2);
    }

    #[test]
    fn unit_weights_flag() {
        let (ds, _) = generate_benchmark(BenchmarkKind::TwoRegime, 40, 0.05, 3).unwrap();
        let cfg = PipelineConfig { unit_weights: true, ..Default::default() };
        let out = identify(&ds, &cfg).unwrap();
        assert!(out.model.rules().iter().all(|r| r.weight == 1.0));
    }
}
