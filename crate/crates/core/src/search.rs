//! Slice search strategies over the predicate lattice.
//!
//! * **Batch** evaluates every predicate up to the maximum cross size in one
//!   round.
//! * **Iterative** evaluates cross size `l` in round `l`, refining only the
//!   non-significant slices of the previous round and skipping any
//!   candidate contained in a significant slice or in a slice smaller than
//!   the minimum size.
//! * **Priority** pops non-significant slices best-first (lowest p-value by
//!   default) and refines them until the estimated number of nonempty
//!   candidates reaches the per-round budget `K`. The estimate discounts
//!   each candidate by the observed nonempty rate of its cross size.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{DiffMode, EvalError, EvalSettings, Evaluator, SliceEvaluation};
use crate::lattice::{self, enumerate_layer, expand, Predicate, PruneIndex, SingletonPredicate};
use crate::metrics::{Metric, MetricKind};
use crate::schema::{EncodedDataset, FeatureSchema};
use crate::stats::{classify, SliceStat, TForm, WantedDirection};
use crate::timing::process_cpu_seconds;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Batch,
    #[default]
    Iterative,
    Priority,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batch" => Ok(Strategy::Batch),
            "iterative" => Ok(Strategy::Iterative),
            "priority" => Ok(Strategy::Priority),
            _ => Err(format!("unknown strategy `{s}` (batch, iterative, priority)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Batch => "batch",
            Strategy::Iterative => "iterative",
            Strategy::Priority => "priority",
        })
    }
}

/// Queue order for the priority strategy. Lower scores pop first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityScore {
    #[default]
    PValue,
    /// Uniform random score per slice.
    Random,
    /// Cross size.
    BreadthFirst,
}

impl FromStr for PriorityScore {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p-value" => Ok(PriorityScore::PValue),
            "random" => Ok(PriorityScore::Random),
            "breadth-first" => Ok(PriorityScore::BreadthFirst),
            _ => Err(format!("unknown priority score `{s}` (p-value, random, breadth-first)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Maximum cross size `L`.
    pub max_cross_size: usize,
    /// Minimum slice size `N_min`.
    pub min_slice_size: usize,
    pub alpha: f64,
    /// Bootstrap replicate count `B`.
    pub replicates: usize,
    /// Target nonempty candidates per priority round. `None` means 12% of
    /// the batch search space.
    pub k_per_iter: Option<usize>,
    /// Priority rounds `I`.
    pub iterations: usize,
    pub seed: u64,
    pub diff: DiffMode,
    pub metric: Metric,
    pub direction: WantedDirection,
    pub workers: usize,
    pub t_form: TForm,
    pub priority_score: PriorityScore,
    /// Refine slices whose metric could not be tested.
    pub expand_untestable: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Iterative,
            max_cross_size: 3,
            min_slice_size: 1,
            alpha: 0.01,
            replicates: 20,
            k_per_iter: None,
            iterations: 5,
            seed: 0,
            diff: DiffMode::VsOverall,
            metric: Metric::new(MetricKind::Accuracy),
            direction: WantedDirection::Lower,
            workers: 1,
            t_form: TForm::BootstrapSe,
            priority_score: PriorityScore::PValue,
            expand_untestable: false,
        }
    }
}

/// Share of the batch search space used as the default `K`.
pub const DEFAULT_K_FRACTION: f64 = 0.12;

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.max_cross_size == 0 {
            return bad("max_cross_size must be >= 1");
        }
        if self.min_slice_size == 0 {
            return bad("min_slice_size must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must be in (0, 1)");
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        if self.strategy == Strategy::Priority {
            if self.k_per_iter == Some(0) {
                return bad("k_per_iter must be >= 1");
            }
            if self.iterations == 0 {
                return bad("iterations must be >= 1");
            }
        }
        Ok(())
    }

    /// `K`, defaulted from the schema when unset.
    pub fn resolved_k(&self, schema: &FeatureSchema) -> usize {
        self.k_per_iter.unwrap_or_else(|| default_k(schema, self.max_cross_size))
    }

    fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            metric: self.metric,
            diff: self.diff,
            replicates: self.replicates,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

pub fn default_k(schema: &FeatureSchema, max_cross_size: usize) -> usize {
    let space = lattice::batch_space_size(schema, max_cross_size) as f64;
    ((space * DEFAULT_K_FRACTION).ceil() as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceOutcome {
    Significant,
    NotSignificant,
    TooSmall,
    Untestable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluatedSlice {
    pub stat: SliceStat,
    pub outcome: SliceOutcome,
    /// Round in which the slice was evaluated, from 1.
    pub iteration: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub candidates: usize,
    /// Budget-weighted candidate count the priority strategy planned with.
    pub estimated_nonempty: Option<f64>,
    pub nonempty: usize,
    pub significant: usize,
    pub too_small: usize,
    pub untestable: usize,
    /// Refinements skipped because a significant or too-small slice
    /// contains them.
    pub pruned: usize,
    pub cumulative_candidates: usize,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub strategy: Strategy,
    pub k_per_iter: Option<usize>,
    pub overall: SliceEvaluation,
    /// Every nonempty evaluated slice, in evaluation order.
    pub evaluated: Vec<EvaluatedSlice>,
    pub iterations: Vec<IterationStats>,
    pub candidates_evaluated: usize,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
}

impl SearchReport {
    pub fn significant(&self) -> impl Iterator<Item = &EvaluatedSlice> {
        self.evaluated.iter().filter(|e| e.outcome == SliceOutcome::Significant)
    }

    /// Significant slices not contained in another significant slice.
    pub fn maximal(&self) -> Vec<&EvaluatedSlice> {
        let sig: Vec<&EvaluatedSlice> = self.significant().collect();
        let keep: HashSet<Predicate> =
            maximal_filter(&sig.iter().map(|e| e.stat.predicate.clone()).collect::<Vec<_>>())
                .into_iter()
                .collect();
        sig.into_iter().filter(|e| keep.contains(&e.stat.predicate)).collect()
    }

    pub fn maximal_predicates(&self) -> BTreeSet<Predicate> {
        self.maximal().into_iter().map(|e| e.stat.predicate.clone()).collect()
    }
}

/// Drops every predicate whose slice lies strictly inside another one of
/// the input. Input order is preserved.
pub fn maximal_filter(slices: &[Predicate]) -> Vec<Predicate> {
    let mut index = PruneIndex::new();
    for p in slices {
        index.insert(p.clone());
    }
    slices
        .iter()
        .filter(|p| {
            !p.subsets()
                .any(|s| s.cross_size() < p.cross_size() && index.contains(&s))
        })
        .cloned()
        .collect()
}

/// Running ratio of nonempty to generated candidates per cross size.
#[derive(Clone, Debug, Default)]
pub struct NonemptyRates {
    seen: Vec<u64>,
    nonempty: Vec<u64>,
}

impl NonemptyRates {
    pub fn record(&mut self, cross_size: usize, nonempty: bool) {
        if self.seen.len() <= cross_size {
            self.seen.resize(cross_size + 1, 0);
            self.nonempty.resize(cross_size + 1, 0);
        }
        self.seen[cross_size] += 1;
        self.nonempty[cross_size] += nonempty as u64;
    }

    /// Observed rate at `cross_size`, falling back to the nearest smaller
    /// cross size with data, and to 1.0 when there is none.
    pub fn lookup(&self, cross_size: usize) -> f64 {
        (1..=cross_size)
            .rev()
            .find_map(|l| match self.seen.get(l) {
                Some(&n) if n > 0 => Some(self.nonempty[l] as f64 / n as f64),
                _ => None,
            })
            .unwrap_or(1.0)
    }
}

struct QueueEntry {
    score: f64,
    size: usize,
    predicate: Predicate,
}

impl Ord for QueueEntry {
    // Max-heap: the entry that compares greatest pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.size.cmp(&other.size))
            .then_with(|| other.predicate.cmp(&self.predicate))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

/// Round-by-round search state shared by all strategies.
struct Driver<'a, 'p> {
    config: &'a SearchConfig,
    evaluator: Evaluator<'a>,
    singletons: Vec<SingletonPredicate>,
    prune: PruneIndex,
    seen: HashSet<Predicate>,
    rates: NonemptyRates,
    evaluated: Vec<EvaluatedSlice>,
    iterations: Vec<IterationStats>,
    candidates_total: usize,
    progress: Option<&'p mut dyn FnMut(&IterationStats)>,
}

impl<'a, 'p> Driver<'a, 'p> {
    fn new(
        config: &'a SearchConfig,
        schema: &'a FeatureSchema,
        dataset: &'a EncodedDataset,
        progress: Option<&'p mut dyn FnMut(&IterationStats)>,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        Ok(Self {
            config,
            evaluator: Evaluator::new(dataset, config.eval_settings())?,
            singletons: lattice::singletons(schema),
            prune: PruneIndex::new(),
            seen: HashSet::new(),
            rates: NonemptyRates::default(),
            evaluated: Vec::new(),
            iterations: Vec::new(),
            candidates_total: 0,
            progress,
        })
    }

    fn expand(&mut self, base: &Predicate, out: &mut Vec<Predicate>) -> usize {
        let e = expand(
            base,
            &self.singletons,
            &self.prune,
            self.config.max_cross_size,
            &mut self.seen,
        );
        out.extend(e.candidates);
        e.pruned
    }

    /// Evaluates and classifies one round. Returns the slices that may be
    /// refined further, with their p-values and sizes.
    fn round(
        &mut self,
        candidates: &[Predicate],
        pruned: usize,
        estimated_nonempty: Option<f64>,
    ) -> Vec<(Predicate, f64, usize)> {
        let iteration = self.iterations.len() + 1;
        let outcome = self.evaluator.evaluate(candidates);
        for c in candidates {
            self.rates.record(c.cross_size(), outcome.slices.contains_key(c));
        }
        self.candidates_total += candidates.len();

        let mut stats = IterationStats {
            iteration,
            candidates: candidates.len(),
            estimated_nonempty,
            nonempty: outcome.slices.len(),
            pruned,
            cumulative_candidates: self.candidates_total,
            ..Default::default()
        };
        let mut frontier = Vec::new();
        for eval in outcome.slices.values() {
            let stat = classify(eval, self.config.alpha, self.config.direction, self.config.t_form);
            let outcome = if stat.size < self.config.min_slice_size {
                stats.too_small += 1;
                self.prune.insert(stat.predicate.clone());
                SliceOutcome::TooSmall
            } else if !stat.testable() {
                stats.untestable += 1;
                if self.config.expand_untestable {
                    frontier.push((stat.predicate.clone(), 1.0, stat.size));
                }
                SliceOutcome::Untestable
            } else if stat.significant {
                stats.significant += 1;
                self.prune.insert(stat.predicate.clone());
                SliceOutcome::Significant
            } else {
                frontier.push((stat.predicate.clone(), stat.p_value().unwrap_or(1.0), stat.size));
                SliceOutcome::NotSignificant
            };
            self.evaluated.push(EvaluatedSlice {
                stat,
                outcome,
                iteration,
            });
        }
        if let Some(cb) = self.progress.as_mut() {
            cb(&stats);
        }
        self.iterations.push(stats);
        frontier
    }

    fn finish(self, started: Instant, cpu0: f64, k_per_iter: Option<usize>) -> SearchReport {
        SearchReport {
            strategy: self.config.strategy,
            k_per_iter,
            overall: self.evaluator.evaluate_overall(),
            evaluated: self.evaluated,
            iterations: self.iterations,
            candidates_evaluated: self.candidates_total,
            wall_seconds: started.elapsed().as_secs_f64(),
            cpu_seconds: process_cpu_seconds() - cpu0,
        }
    }
}

pub fn run_search(
    config: &SearchConfig,
    schema: &FeatureSchema,
    dataset: &EncodedDataset,
) -> Result<SearchReport, SearchError> {
    run_search_with_progress(config, schema, dataset, None)
}

/// Runs `config.strategy`, reporting every finished round to `progress`.
pub fn run_search_with_progress(
    config: &SearchConfig,
    schema: &FeatureSchema,
    dataset: &EncodedDataset,
    progress: Option<&mut dyn FnMut(&IterationStats)>,
) -> Result<SearchReport, SearchError> {
    let started = Instant::now();
    let cpu0 = process_cpu_seconds();
    let mut driver = Driver::new(config, schema, dataset, progress)?;
    let k = match config.strategy {
        Strategy::Batch => {
            batch(&mut driver, schema);
            None
        }
        Strategy::Iterative => {
            iterative(&mut driver);
            None
        }
        Strategy::Priority => {
            let k = config.resolved_k(schema);
            priority(&mut driver, k);
            Some(k)
        }
    };
    Ok(driver.finish(started, cpu0, k))
}

pub fn run_batch(config: &SearchConfig, schema: &FeatureSchema, dataset: &EncodedDataset) -> Result<SearchReport, SearchError> {
    let config = SearchConfig {
        strategy: Strategy::Batch,
        ..config.clone()
    };
    run_search(&config, schema, dataset)
}

pub fn run_iterative(config: &SearchConfig, schema: &FeatureSchema, dataset: &EncodedDataset) -> Result<SearchReport, SearchError> {
    let config = SearchConfig {
        strategy: Strategy::Iterative,
        ..config.clone()
    };
    run_search(&config, schema, dataset)
}

pub fn run_priority(config: &SearchConfig, schema: &FeatureSchema, dataset: &EncodedDataset) -> Result<SearchReport, SearchError> {
    let config = SearchConfig {
        strategy: Strategy::Priority,
        ..config.clone()
    };
    run_search(&config, schema, dataset)
}

fn batch(driver: &mut Driver<'_, '_>, schema: &FeatureSchema) {
    let candidates: Vec<Predicate> = (1..=driver.config.max_cross_size)
        .flat_map(|l| enumerate_layer(schema, l))
        .collect();
    driver.round(&candidates, 0, None);
}

fn iterative(driver: &mut Driver<'_, '_>) {
    let mut frontier = vec![Predicate::overall()];
    for _ in 1..=driver.config.max_cross_size {
        let mut candidates = Vec::new();
        let mut pruned = 0;
        for base in &frontier {
            pruned += driver.expand(base, &mut candidates);
        }
        if candidates.is_empty() {
            break;
        }
        frontier = driver
            .round(&candidates, pruned, None)
            .into_iter()
            .map(|(p, _, _)| p)
            .collect();
    }
}

fn priority(driver: &mut Driver<'_, '_>, k_target: usize) {
    let max_l = driver.config.max_cross_size;
    let mut random = ChaCha8Rng::seed_from_u64(driver.config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut queue: BinaryHeap<QueueEntry> = BinaryHeap::new();
    let mut push_all = |queue: &mut BinaryHeap<QueueEntry>, slices: Vec<(Predicate, f64, usize)>| {
        for (predicate, p, size) in slices {
            // Nothing to refine at the maximum cross size.
            if predicate.cross_size() >= max_l {
                continue;
            }
            let score = match driver.config.priority_score {
                PriorityScore::PValue => p,
                PriorityScore::Random => random.random::<f64>(),
                PriorityScore::BreadthFirst => predicate.cross_size() as f64,
            };
            queue.push(QueueEntry { score, size, predicate });
        }
    };

    let mut first = Vec::new();
    let pruned = driver.expand(&Predicate::overall(), &mut first);
    let next = driver.round(&first, pruned, None);
    push_all(&mut queue, next);

    for _ in 2..=driver.config.iterations {
        let mut candidates = Vec::new();
        let mut pruned = 0;
        let mut estimated = 0.0;
        while estimated < k_target as f64 {
            let Some(entry) = queue.pop() else { break };
            let start = candidates.len();
            pruned += driver.expand(&entry.predicate, &mut candidates);
            estimated += candidates[start..]
                .iter()
                .map(|c| driver.rates.lookup(c.cross_size()))
                .sum::<f64>();
        }
        if candidates.is_empty() {
            break;
        }
        let next = driver.round(&candidates, pruned, Some(estimated));
        push_all(&mut queue, next);
    }
}
