//! Run configuration and the end-to-end run: ingest, infer schema, encode,
//! search, write the report.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::evaluator::DiffMode;
use crate::metrics::{Metric, MetricKind};
use crate::report::{report_records, write_records, RunSummary};
use crate::schema::{encode, infer_schema, load_dataset, load_predictions, ColumnKind, IngestError};
use crate::search::{run_search_with_progress, IterationStats, PriorityScore, SearchConfig, SearchError, Strategy};
use crate::stats::{TForm, WantedDirection};

pub const DEFAULT_TOP_J: usize = 100;
pub const DEFAULT_NUM_BINS: usize = 10;
pub const DEFAULT_OUTPUT: &str = "slices.jsonl";
pub const DEFAULT_LABEL_COLUMN: &str = "label";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Partially specified settings, from a config file or the command line.
/// Every field is optional; [`ConfigOverrides::merge`] layers them.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigOverrides {
    pub data: Option<PathBuf>,
    pub label_column: Option<String>,
    pub predictions: Option<PathBuf>,
    pub baseline_predictions: Option<PathBuf>,
    pub metric: Option<MetricKind>,
    pub threshold: Option<f64>,
    pub auc_buckets: Option<usize>,
    pub strategy: Option<Strategy>,
    pub max_cross_size: Option<usize>,
    pub min_slice_size: Option<usize>,
    pub alpha: Option<f64>,
    pub replicates: Option<usize>,
    pub top_j: Option<usize>,
    pub num_bins: Option<usize>,
    pub k_per_iter: Option<usize>,
    pub iterations: Option<usize>,
    pub direction: Option<WantedDirection>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub verbose: Option<bool>,
    pub progress: Option<bool>,
    pub delimiter: Option<char>,
    pub priority_score: Option<PriorityScore>,
    pub t_statistic: Option<TForm>,
    pub expand_untestable: Option<bool>,
    /// Declared kinds for columns whose type should not be inferred.
    pub columns: Option<BTreeMap<String, ColumnKind>>,
}

impl ConfigOverrides {
    /// `self` with every field set in `top` replaced.
    pub fn merge(self, top: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => {
                ConfigOverrides { $($f: top.$f.or(self.$f)),* }
            };
        }
        pick!(
            data, label_column, predictions, baseline_predictions, metric, threshold, auc_buckets, strategy,
            max_cross_size, min_slice_size, alpha, replicates, top_j, num_bins, k_per_iter, iterations, direction,
            seed, workers, output, verbose, progress, delimiter, priority_score, t_statistic, expand_untestable,
            columns
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub label_column: String,
    pub predictions: PathBuf,
    pub baseline_predictions: Option<PathBuf>,
    pub search: SearchConfig,
    pub top_j: usize,
    pub num_bins: usize,
    pub output: PathBuf,
    pub verbose: bool,
    pub progress: bool,
    pub delimiter: u8,
    pub column_kinds: HashMap<String, ColumnKind>,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn at_least(field: &'static str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v < min {
        Err(invalid(field, format!("must be >= {min}, got {v}")))
    } else {
        Ok(v)
    }
}

impl RunConfig {
    pub fn resolve(o: ConfigOverrides) -> Result<RunConfig, ConfigError> {
        let defaults = SearchConfig::default();
        let data = o.data.ok_or(ConfigError::Missing("data"))?;
        let predictions = o.predictions.ok_or(ConfigError::Missing("predictions"))?;

        let threshold = o.threshold.unwrap_or(Metric::DEFAULT_THRESHOLD);
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(invalid("threshold", format!("must be in (0, 1), got {threshold}")));
        }
        let auc_buckets = at_least("auc-buckets", o.auc_buckets.unwrap_or(Metric::DEFAULT_AUC_BUCKETS), 2)?;
        let metric = Metric::with_options(o.metric.unwrap_or(MetricKind::Accuracy), threshold, auc_buckets)
            .map_err(|e| invalid("metric", e.to_string()))?;

        let alpha = o.alpha.unwrap_or(defaults.alpha);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must be in (0, 1), got {alpha}")));
        }
        let k_per_iter = match o.k_per_iter {
            Some(k) => Some(at_least("k-per-iter", k, 1)?),
            None => None,
        };
        let delimiter = o.delimiter.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(invalid("delimiter", format!("must be a single ASCII character, got {delimiter:?}")));
        }

        let search = SearchConfig {
            strategy: o.strategy.unwrap_or(defaults.strategy),
            max_cross_size: at_least("max-cross-size", o.max_cross_size.unwrap_or(defaults.max_cross_size), 1)?,
            min_slice_size: at_least("min-slice-size", o.min_slice_size.unwrap_or(defaults.min_slice_size), 1)?,
            alpha,
            replicates: at_least("replicates", o.replicates.unwrap_or(defaults.replicates), 1)?,
            k_per_iter,
            iterations: at_least("iterations", o.iterations.unwrap_or(defaults.iterations), 1)?,
            seed: o.seed.unwrap_or(defaults.seed),
            diff: if o.baseline_predictions.is_some() {
                DiffMode::VsBaseline
            } else {
                DiffMode::VsOverall
            },
            metric,
            direction: o.direction.unwrap_or(defaults.direction),
            workers: at_least("workers", o.workers.unwrap_or(defaults.workers), 1)?,
            t_form: o.t_statistic.unwrap_or(defaults.t_form),
            priority_score: o.priority_score.unwrap_or(defaults.priority_score),
            expand_untestable: o.expand_untestable.unwrap_or(defaults.expand_untestable),
        };

        Ok(RunConfig {
            data,
            label_column: o.label_column.unwrap_or_else(|| DEFAULT_LABEL_COLUMN.to_string()),
            predictions,
            baseline_predictions: o.baseline_predictions,
            search,
            top_j: at_least("top-j", o.top_j.unwrap_or(DEFAULT_TOP_J), 1)?,
            num_bins: at_least("num-bins", o.num_bins.unwrap_or(DEFAULT_NUM_BINS), 1)?,
            output: o.output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            verbose: o.verbose.unwrap_or(false),
            progress: o.progress.unwrap_or(false),
            delimiter: delimiter as u8,
            column_kinds: o.columns.unwrap_or_default().into_iter().collect(),
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Ingest {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error(transparent)]
    Encode(IngestError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Runs the whole pipeline and writes the report to `config.output`.
pub fn run(
    config: &RunConfig,
    progress: Option<&mut dyn FnMut(&IterationStats)>,
) -> Result<RunSummary, RunError> {
    fn ingest(path: &Path) -> impl FnOnce(IngestError) -> RunError + '_ {
        move |source| RunError::Ingest {
            path: path.to_path_buf(),
            source,
        }
    }
    let raw = load_dataset(&config.data, config.delimiter, &config.label_column, &config.column_kinds)
        .map_err(ingest(&config.data))?;
    let mut preds = vec![load_predictions(&config.predictions, config.delimiter, "model", raw.n_rows())
        .map_err(ingest(&config.predictions))?];
    if let Some(path) = &config.baseline_predictions {
        preds.push(load_predictions(path, config.delimiter, "baseline", raw.n_rows()).map_err(ingest(path))?);
    }
    let schema = infer_schema(&raw, config.top_j, config.num_bins).map_err(RunError::Encode)?;
    let dataset = encode(&raw, preds, &schema).map_err(RunError::Encode)?;

    let report = run_search_with_progress(&config.search, &schema, &dataset, progress)?;
    let records = report_records(&report, &schema, dataset.model_ids(), config.verbose);

    let output_err = |source| RunError::Output {
        path: config.output.clone(),
        source,
    };
    let file = File::create(&config.output).map_err(output_err)?;
    write_records(BufWriter::new(file), &records).map_err(output_err)?;
    Ok(RunSummary::new(&report, dataset.n_rows(), records.len()))
}
