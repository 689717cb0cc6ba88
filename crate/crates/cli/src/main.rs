use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use slicefind_core::config::{run, ConfigOverrides, RunConfig};
use slicefind_core::search::IterationStats;
use slicefind_core::{MetricKind, PriorityScore, Strategy, TForm, WantedDirection};

/// Find data slices where a binary classifier under- or over-performs.
///
/// Settings come from `--config` (TOML, kebab-case keys matching the long
/// flags) and are overridden by command-line flags.
#[derive(Debug, Parser)]
#[command(name = "slicefind", version)]
struct Args {
    /// TOML file with default settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV with feature columns and a label column.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// CSV with `row_index,score` for the model under test.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Compare against this model on each slice instead of the overall data.
    #[arg(long)]
    baseline_predictions: Option<PathBuf>,
    /// accuracy, precision, recall, f1, auc, log_loss
    #[arg(long)]
    metric: Option<MetricKind>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    auc_buckets: Option<usize>,
    /// batch, iterative or priority
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    max_cross_size: Option<usize>,
    #[arg(long)]
    min_slice_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Most frequent categories kept per feature; the rest fold into OTHER.
    #[arg(long)]
    top_j: Option<usize>,
    /// Quantile bins per numeric feature.
    #[arg(long)]
    num_bins: Option<usize>,
    /// Priority strategy: target nonempty candidates per round.
    #[arg(long)]
    k_per_iter: Option<usize>,
    /// Priority strategy: number of rounds.
    #[arg(long)]
    iterations: Option<usize>,
    /// lower, higher or any
    #[arg(long)]
    direction: Option<WantedDirection>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// JSON-lines report path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write every evaluated slice, not just the maximal significant ones.
    #[arg(long)]
    verbose: bool,
    /// Print per-round progress to stderr.
    #[arg(long)]
    progress: bool,
    #[arg(long)]
    delimiter: Option<char>,
    /// p-value, random or breadth-first
    #[arg(long)]
    priority_score: Option<PriorityScore>,
    /// bootstrap-se or replicate-mean
    #[arg(long)]
    t_statistic: Option<TForm>,
    /// Refine slices whose metric could not be tested.
    #[arg(long)]
    expand_untestable: bool,
}

impl Args {
    fn overrides(self) -> ConfigOverrides {
        ConfigOverrides {
            data: self.data,
            label_column: self.label_column,
            predictions: self.predictions,
            baseline_predictions: self.baseline_predictions,
            metric: self.metric,
            threshold: self.threshold,
            auc_buckets: self.auc_buckets,
            strategy: self.strategy,
            max_cross_size: self.max_cross_size,
            min_slice_size: self.min_slice_size,
            alpha: self.alpha,
            replicates: self.replicates,
            top_j: self.top_j,
            num_bins: self.num_bins,
            k_per_iter: self.k_per_iter,
            iterations: self.iterations,
            direction: self.direction,
            seed: self.seed,
            workers: self.workers,
            output: self.output,
            verbose: self.verbose.then_some(true),
            progress: self.progress.then_some(true),
            delimiter: self.delimiter,
            priority_score: self.priority_score,
            t_statistic: self.t_statistic,
            expand_untestable: self.expand_untestable.then_some(true),
            columns: None,
        }
    }
}

fn load_config(args: Args) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ConfigOverrides::default(),
    };
    Ok(RunConfig::resolve(file.merge(args.overrides()))?)
}

fn print_progress(s: &IterationStats) {
    let estimate = s.estimated_nonempty.map(|e| format!(" estimated={e:.1}")).unwrap_or_default();
    eprintln!(
        "iteration {}: candidates={}{estimate} nonempty={} significant={} too_small={} untestable={} pruned={}",
        s.iteration, s.candidates, s.nonempty, s.significant, s.too_small, s.untestable, s.pruned
    );
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("slicefind: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut progress = print_progress;
    let cb: Option<&mut dyn FnMut(&IterationStats)> = if config.progress { Some(&mut progress) } else { None };
    match run(&config, cb) {
        Ok(summary) => {
            println!("{summary}");
            println!("report                {}", config.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("slicefind: {:#}", anyhow::Error::from(e));
            ExitCode::FAILURE
        }
    }
}
