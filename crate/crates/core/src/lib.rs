//! Discovery of pure measurement models for latent variables from
//! vanishing-tetrad constraints.
//!
//! The pipeline runs from a dataset or covariance matrix through
//! [`find_measurement_pattern`] to [`purify_pattern`], which lists the pure
//! measurement models compatible with the data. The [`simulate`],
//! [`evaluate`] and [`replicate`] modules generate ground truth and score
//! estimates against it.

pub mod cliques;
pub mod constraints;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod graph;
pub mod pattern;
pub mod purify;
pub mod replicate;
pub mod simulate;
pub mod stats;
pub mod tetrad;

pub use constraints::{unclustered, ConstraintOracle, MomentOracle};
pub use error::{Error, Result};
pub use evaluate::{match_latents, score_output, EvaluationReport};
pub use graph::{
    d_separated, is_pure, maximal_purifications, purifications_oracle, validate_graph,
    LatentVariableGraph, LinearParameters, PureMeasurementModel, DEFAULT_MIN_CHILDREN,
};
pub use pattern::{find_measurement_pattern, MeasurementPattern, PatternOptions};
pub use purify::{mm_equal, mm_set_equal, purify_pattern, Purification, PurificationOutcome};
pub use replicate::{run_replication, RunConfig, StudyTable};
pub use simulate::{
    random_purifiable_graph, sample_linear, sample_study3, GroundTruth, ImpuritySpec, StudyConfig,
};
pub use stats::{Dataset, MomentCache, SignificanceConfig, TestKind};
pub use tetrad::{tetrad_test, Tetrad, TetradKind};
