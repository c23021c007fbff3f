//! Identification of compact Takagi-Sugeno fuzzy regression models.
//!
//! The pipeline clusters a descriptor/activity table with a modified
//! Gath-Geva algorithm whose clusters carry local linear models, turns the
//! clusters into fuzzy rules, and optionally reduces the model: consequent
//! columns are ranked by orthogonal-least-squares error-reduction ratios and
//! antecedent columns are removed by backward elimination on Fisher's
//! interclass separability. Leave-one-out cross-validation reports RMSE and
//! r-squared.
//!
//! - [`model`] - rules and normalized-fuzzy-mean inference
//! - [`clustering`] - the alternating optimization
//! - [`selection`] - consequent ranking and antecedent elimination
//! - [`evaluation`] - metrics and leave-one-out cross-validation
//! - [`dataio`] - CSV loading, centering, model files, benchmarks
//! - [`pipeline`] - center, cluster, select and assemble in one call

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod selection;

pub use clustering::{
    ClusterPrototype, ClusteringConfig, ClusteringResult, ColumnRoles, PartitionMatrix,
};
pub use dataio::{ActivityColumn, BenchmarkKind, Centering, Dataset, ModelFile, Provenance};
pub use error::{Error, Result};
pub use evaluation::{CrossValReport, Metrics};
pub use model::{GaussianAntecedent, LocalLinearModel, Prediction, Rule, TsModel};
pub use pipeline::{Identified, PipelineConfig, SelectionConfig};
pub use selection::{ConsequentRanking, FisherTrace, OlsDecomposition, SelectionReport};
