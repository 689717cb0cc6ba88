//! Automated slice finding for binary classifiers.
//!
//! Given a labelled dataset and one or two sets of model scores, the crate
//! searches conjunctions of feature predicates for slices whose metric
//! differs significantly from the overall dataset (or from a baseline
//! model on the same slice). Significance comes from a Poisson bootstrap
//! and a Student-t test; the lattice of candidate slices is searched in
//! batch, level by level with pruning, or best-first by p-value.

pub mod config;
pub mod evaluator;
pub mod lattice;
pub mod metrics;
pub mod report;
pub mod schema;
pub mod search;
pub mod stats;
pub mod synth;
pub mod timing;

pub use evaluator::{DiffMode, EvalSettings, EvaluationOutcome, Evaluator, SliceEvaluation};
pub use lattice::{is_subslice, Predicate, PruneIndex, SingletonPredicate};
pub use metrics::{Combiner, Metric, MetricAccumulator, MetricKind};
pub use schema::{EncodedDataset, FeatureDomain, FeatureSchema, PredictionSet, RawColumn, RawDataset};
pub use search::{PriorityScore, SearchConfig, SearchReport, Strategy};
pub use stats::{Direction, SliceStat, TForm, WantedDirection};
