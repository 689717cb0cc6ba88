//! Sliced evaluation with Poisson-bootstrap replicates.
//!
//! Each round takes a set of candidate predicates and streams the encoded
//! examples through three stages:
//!
//! 1. slice key extraction: every example is matched against the candidates
//!    and fans out once per matched predicate;
//! 2. metric combining: per (predicate, replicate, model) accumulators are
//!    built over row partitions and merged;
//! 3. metric diff: replicate `b` of a slice yields
//!    `psi_b(slice, h) - psi_b(overall, h)` or `psi_b(slice, h) - psi_b(slice, h')`.
//!
//! Replicate 0 uses unit weights and gives the point estimate. Replicates
//! `1..=B` weight row `r` by `poisson_weight(seed, b, r)`, a pure function,
//! so any worker can recompute it and every strategy sees the same
//! resampling.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::Predicate;
use crate::metrics::{Combiner, Metric, MetricAccumulator};
use crate::schema::{EncodedDataset, MISSING};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// Slice against the overall dataset under the same model.
    #[default]
    VsOverall,
    /// Same slice under the tested model against the baseline model.
    VsBaseline,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("baseline comparison needs two prediction sets, dataset has {0}")]
    MissingBaseline(usize),
    #[error("dataset has no prediction set")]
    NoPredictions,
    #[error("replicate count must be >= 1")]
    NoReplicates,
}

/// Fixed parameters of every evaluation round of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSettings {
    pub metric: Metric,
    pub diff: DiffMode,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Candidates plus settings.
#[derive(Clone, Debug)]
pub struct EvaluationRequest<'a> {
    pub candidates: &'a [Predicate],
    pub settings: EvalSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceStatus {
    Testable,
    /// Every replicate was undefined on one side of the diff.
    Untestable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceEvaluation {
    pub predicate: Predicate,
    /// Unweighted number of matched examples.
    pub size: usize,
    /// Delta under unit weights.
    pub point_delta: Option<f64>,
    /// Usable replicate deltas, in replicate order.
    pub deltas: Vec<f64>,
    /// Replicates dropped because a side of the diff was undefined.
    pub dropped_replicates: usize,
    /// Point metric of each model on the slice.
    pub point_metrics: Vec<Option<f64>>,
    pub status: SliceStatus,
}

#[derive(Clone, Debug)]
pub struct EvaluationOutcome {
    /// Nonempty candidates only.
    pub slices: BTreeMap<Predicate, SliceEvaluation>,
    pub overall: SliceEvaluation,
    /// Number of (example, matched candidate) pairs emitted by slice key
    /// extraction.
    pub fanout: u64,
}

/// Candidates whose singletons all match `row`. Missing values match
/// nothing; the overall predicate matches everything.
pub fn extract_slice_keys<'a>(row: &[u32], candidates: &'a [Predicate]) -> Vec<&'a Predicate> {
    candidates.iter().filter(|p| p.matches(row)).collect()
}

const POISSON1_CDF_LEN: usize = 24;

fn poisson1_cdf() -> [f64; POISSON1_CDF_LEN] {
    let mut cdf = [0.0; POISSON1_CDF_LEN];
    let mut pmf = (-1.0f64).exp();
    let mut acc = 0.0;
    for (k, c) in cdf.iter_mut().enumerate() {
        if k > 0 {
            pmf /= k as f64;
        }
        acc += pmf;
        *c = acc;
    }
    cdf
}

#[inline]
fn poisson1_from_bits(bits: u64, cdf: &[f64; POISSON1_CDF_LEN]) -> u32 {
    let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    cdf.iter().position(|&c| u < c).unwrap_or(POISSON1_CDF_LEN) as u32
}

/// Counter-based replicate weights: ChaCha stream `row`, word `2 (b - 1)`
/// under key `seed` gives the uniform draw for replicate `b`.
#[derive(Clone)]
pub struct PoissonWeights {
    rng: ChaCha8Rng,
    cdf: [f64; POISSON1_CDF_LEN],
}

impl PoissonWeights {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cdf: poisson1_cdf(),
        }
    }

    /// Weights for replicates `0..=replicates` of `row` into `out`.
    pub fn fill(&mut self, row: u64, out: &mut [u32]) {
        out[0] = 1;
        self.rng.set_stream(row);
        self.rng.set_word_pos(0);
        for w in &mut out[1..] {
            *w = poisson1_from_bits(self.rng.next_u64(), &self.cdf);
        }
    }

    pub fn weight(&mut self, replicate: usize, row: u64) -> u32 {
        if replicate == 0 {
            return 1;
        }
        self.rng.set_stream(row);
        self.rng.set_word_pos(2 * (replicate as u128 - 1));
        poisson1_from_bits(self.rng.next_u64(), &self.cdf)
    }
}

/// Poisson(1) replicate weight of `row`; replicate 0 is always 1.
pub fn poisson_weight(seed: u64, replicate: usize, row: u64) -> u32 {
    PoissonWeights::new(seed).weight(replicate, row)
}

/// Accumulator budget per round, in bytes, before candidates are split into
/// blocks.
const ACCUMULATOR_BUDGET: usize = 512 << 20;

/// Runs evaluation rounds over one dataset.
pub struct Evaluator<'a> {
    dataset: &'a EncodedDataset,
    settings: EvalSettings,
    pool: Option<rayon::ThreadPool>,
}

/// Per-partition state for one block of candidates.
struct Partial {
    /// `[candidate][replicate][model]`, flattened.
    accs: Vec<MetricAccumulator>,
    sizes: Vec<usize>,
    fanout: u64,
}

impl Partial {
    fn merge(&mut self, other: Partial) {
        for (a, b) in self.accs.iter_mut().zip(&other.accs) {
            a.merge(b);
        }
        for (a, b) in self.sizes.iter_mut().zip(&other.sizes) {
            *a += b;
        }
        self.fanout += other.fanout;
    }
}

/// Candidate lookup keyed by first singleton.
struct KeyIndex<'c> {
    bounds: Vec<u32>,
    offsets: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    always: Vec<usize>,
    candidates: &'c [Predicate],
}

impl<'c> KeyIndex<'c> {
    fn new(candidates: &'c [Predicate], bounds: Vec<u32>) -> Self {
        let mut offsets = Vec::with_capacity(bounds.len() + 1);
        let mut total = 0usize;
        for &d in &bounds {
            offsets.push(total);
            total += d as usize;
        }
        offsets.push(total);
        let mut buckets = vec![Vec::new(); total];
        let mut always = Vec::new();
        for (i, p) in candidates.iter().enumerate() {
            match p.singletons().first() {
                None => always.push(i),
                Some(s) => buckets[offsets[s.feature as usize] + s.value as usize].push(i),
            }
        }
        Self {
            bounds,
            offsets,
            buckets,
            always,
            candidates,
        }
    }

    #[inline]
    fn for_each_match(&self, row: &[u32], mut f: impl FnMut(usize)) {
        for &i in &self.always {
            f(i);
        }
        for (feature, &v) in row.iter().enumerate() {
            if v == MISSING || v >= self.bounds[feature] {
                continue;
            }
            for &i in &self.buckets[self.offsets[feature] + v as usize] {
                if self.candidates[i].singletons()[1..]
                    .iter()
                    .all(|s| row[s.feature as usize] == s.value)
                {
                    f(i);
                }
            }
        }
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(dataset: &'a EncodedDataset, settings: EvalSettings) -> Result<Self, EvalError> {
        if dataset.n_models() == 0 {
            return Err(EvalError::NoPredictions);
        }
        if settings.diff == DiffMode::VsBaseline && dataset.n_models() < 2 {
            return Err(EvalError::MissingBaseline(dataset.n_models()));
        }
        if settings.replicates == 0 {
            return Err(EvalError::NoReplicates);
        }
        let workers = settings.workers.max(1);
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Ok(Self {
            dataset,
            settings: EvalSettings { workers, ..settings },
            pool,
        })
    }

    pub fn settings(&self) -> &EvalSettings {
        &self.settings
    }

    pub fn dataset(&self) -> &EncodedDataset {
        self.dataset
    }

    fn n_models_used(&self) -> usize {
        match self.settings.diff {
            DiffMode::VsOverall => 1,
            DiffMode::VsBaseline => 2,
        }
    }

    fn accumulator_bytes(&self) -> usize {
        let m = self.settings.metric;
        std::mem::size_of::<MetricAccumulator>()
            + match m.kind() {
                crate::metrics::MetricKind::Auc => 2 * m.auc_buckets() * 8,
                _ => 0,
            }
    }

    /// Evaluates `candidates` plus the overall slice.
    pub fn evaluate(&self, candidates: &[Predicate]) -> EvaluationOutcome {
        let overall_pred = [Predicate::overall()];
        let overall_partial = self.accumulate(&overall_pred);
        let overall_accs = &overall_partial.accs;

        let stride = (self.settings.replicates + 1) * self.n_models_used();
        let per_candidate = stride * self.accumulator_bytes();
        let block = (ACCUMULATOR_BUDGET / (per_candidate * self.settings.workers).max(1)).max(1);

        let mut slices = BTreeMap::new();
        let mut fanout = 0u64;
        for chunk in candidates.chunks(block) {
            let partial = self.accumulate(chunk);
            fanout += partial.fanout;
            for (i, p) in chunk.iter().enumerate() {
                if partial.sizes[i] == 0 {
                    continue;
                }
                let accs = &partial.accs[i * stride..(i + 1) * stride];
                slices.insert(p.clone(), self.diff(p.clone(), partial.sizes[i], accs, overall_accs));
            }
        }
        let overall = self.diff(
            Predicate::overall(),
            overall_partial.sizes[0],
            overall_accs,
            overall_accs,
        );
        EvaluationOutcome {
            slices,
            overall,
            fanout,
        }
    }

    pub fn evaluate_overall(&self) -> SliceEvaluation {
        self.evaluate(&[]).overall
    }

    fn diff(
        &self,
        predicate: Predicate,
        size: usize,
        accs: &[MetricAccumulator],
        overall: &[MetricAccumulator],
    ) -> SliceEvaluation {
        let m = self.n_models_used();
        let metric_at = |accs: &[MetricAccumulator], b: usize, model: usize| accs[b * m + model].extract();
        let mut deltas = Vec::with_capacity(self.settings.replicates);
        let mut dropped = 0;
        let mut point_delta = None;
        for b in 0..=self.settings.replicates {
            let ours = metric_at(accs, b, 0);
            let reference = match self.settings.diff {
                DiffMode::VsOverall => metric_at(overall, b, 0),
                DiffMode::VsBaseline => metric_at(accs, b, 1),
            };
            let delta = ours.zip(reference).map(|(a, r)| a - r);
            if b == 0 {
                point_delta = delta;
            } else if let Some(d) = delta {
                deltas.push(d);
            } else {
                dropped += 1;
            }
        }
        let status = if deltas.is_empty() {
            SliceStatus::Untestable
        } else {
            SliceStatus::Testable
        };
        SliceEvaluation {
            predicate,
            size,
            point_delta,
            deltas,
            dropped_replicates: dropped,
            point_metrics: (0..m).map(|model| metric_at(accs, 0, model)).collect(),
            status,
        }
    }

    fn accumulate(&self, candidates: &[Predicate]) -> Partial {
        let n_rows = self.dataset.n_rows();
        let workers = self.settings.workers;
        if workers == 1 || n_rows < 2 * workers {
            return self.accumulate_rows(candidates, 0..n_rows);
        }
        let chunk = n_rows.div_ceil(workers);
        let ranges: Vec<Range<usize>> = (0..workers)
            .map(|w| (w * chunk).min(n_rows)..((w + 1) * chunk).min(n_rows))
            .collect();
        let pool = self.pool.as_ref().expect("pool for workers > 1");
        let partials: Vec<Partial> = pool.install(|| {
            ranges
                .into_par_iter()
                .map(|r| self.accumulate_rows(candidates, r))
                .collect()
        });
        let mut iter = partials.into_iter();
        let mut total = iter.next().expect("at least one partition");
        for p in iter {
            total.merge(p);
        }
        total
    }

    fn accumulate_rows(&self, candidates: &[Predicate], rows: Range<usize>) -> Partial {
        let b1 = self.settings.replicates + 1;
        let m = self.n_models_used();
        let stride = b1 * m;
        let template = self.settings.metric.accumulator();
        let mut accs = vec![template; candidates.len() * stride];
        let mut sizes = vec![0usize; candidates.len()];
        let mut fanout = 0u64;

        let index = KeyIndex::new(candidates, self.domain_bounds(candidates));
        let mut weights = PoissonWeights::new(self.settings.seed);
        let mut w = vec![0u32; b1];
        let mut matched = Vec::new();
        for row in rows {
            matched.clear();
            index.for_each_match(self.dataset.row(row), |i| matched.push(i));
            if matched.is_empty() {
                continue;
            }
            weights.fill(row as u64, &mut w);
            let label = self.dataset.label(row);
            let mut scores = [0.0f64; 2];
            for (model, s) in scores.iter_mut().enumerate().take(m) {
                *s = self.dataset.score(model, row);
            }
            fanout += matched.len() as u64;
            for &c in &matched {
                sizes[c] += 1;
                let base = c * stride;
                for (b, &wb) in w.iter().enumerate() {
                    if wb == 0 {
                        continue;
                    }
                    for (model, &score) in scores.iter().enumerate().take(m) {
                        accs[base + b * m + model].add(label, score, wb as f64);
                    }
                }
            }
        }
        Partial { accs, sizes, fanout }
    }

    /// Per-feature exclusive upper bound on the first-singleton value ids of
    /// `candidates`.
    fn domain_bounds(&self, candidates: &[Predicate]) -> Vec<u32> {
        let mut bounds = vec![0u32; self.dataset.n_features()];
        for p in candidates {
            if let Some(s) = p.singletons().first() {
                let b = &mut bounds[s.feature as usize];
                *b = (*b).max(s.value + 1);
            }
        }
        bounds
    }
}

/// One-shot evaluation of `request.candidates`.
pub fn evaluate(dataset: &EncodedDataset, request: &EvaluationRequest<'_>) -> Result<EvaluationOutcome, EvalError> {
    Ok(Evaluator::new(dataset, request.settings)?.evaluate(request.candidates))
}

/// Evaluation of the overall slice alone.
pub fn overall_evaluation(dataset: &EncodedDataset, settings: EvalSettings) -> Result<SliceEvaluation, EvalError> {
    Ok(Evaluator::new(dataset, settings)?.evaluate_overall())
}

/// Point metric of every slice in `candidates` by direct filtering; a
/// reference path for tests and diagnostics.
pub fn filter_then_compute(
    dataset: &EncodedDataset,
    candidates: &[Predicate],
    metric: Metric,
    model: usize,
) -> HashMap<Predicate, (usize, Option<f64>)> {
    let mut out = HashMap::new();
    for p in candidates {
        let rows: Vec<usize> = (0..dataset.n_rows()).filter(|&r| p.matches(dataset.row(r))).collect();
        if rows.is_empty() {
            continue;
        }
        let labels: Vec<bool> = rows.iter().map(|&r| dataset.label(r)).collect();
        let scores: Vec<f64> = rows.iter().map(|&r| dataset.score(model, r)).collect();
        out.insert(p.clone(), (rows.len(), metric.compute(&labels, &scores)));
    }
    out
}
