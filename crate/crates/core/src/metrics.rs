//! Mergeable metric accumulators for binary classification.
//!
//! Every metric is computed from bounded-size sufficient statistics that can
//! be built on disjoint partitions of the data and merged in any order. The
//! [`Combiner`] trait is that contract; [`MetricAccumulator`] dispatches to
//! the concrete accumulators selected by a [`Metric`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Score clamp used by log loss.
pub const LOG_LOSS_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    F1,
    Auc,
    LogLoss,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Accuracy,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::F1,
        MetricKind::Auc,
        MetricKind::LogLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
            MetricKind::Auc => "auc",
            MetricKind::LogLoss => "log_loss",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("decision threshold must be in (0, 1), got {0}")]
    Threshold(f64),
    #[error("AUC bucket count must be >= 2, got {0}")]
    Buckets(usize),
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "logloss" && *k == MetricKind::LogLoss))
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

/// A metric together with its configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric {
    kind: MetricKind,
    threshold: f64,
    auc_buckets: usize,
}

impl Metric {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;
    pub const DEFAULT_AUC_BUCKETS: usize = 128;

    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            threshold: Self::DEFAULT_THRESHOLD,
            auc_buckets: Self::DEFAULT_AUC_BUCKETS,
        }
    }

    pub fn with_options(kind: MetricKind, threshold: f64, auc_buckets: usize) -> Result<Self, MetricError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(MetricError::Threshold(threshold));
        }
        if auc_buckets < 2 {
            return Err(MetricError::Buckets(auc_buckets));
        }
        Ok(Self {
            kind,
            threshold,
            auc_buckets,
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn auc_buckets(&self) -> usize {
        self.auc_buckets
    }

    /// Identity accumulator for this metric.
    pub fn accumulator(&self) -> MetricAccumulator {
        match self.kind {
            MetricKind::Accuracy | MetricKind::Precision | MetricKind::Recall | MetricKind::F1 => {
                MetricAccumulator::Confusion(Confusion::new(self.kind, self.threshold))
            }
            MetricKind::Auc => MetricAccumulator::Auc(AucHistogram::new(self.auc_buckets)),
            MetricKind::LogLoss => MetricAccumulator::LogLoss(LogLossSum::default()),
        }
    }

    /// Single pass over a labelled sample.
    pub fn compute(&self, labels: &[bool], scores: &[f64]) -> Option<f64> {
        let mut acc = self.accumulator();
        for (&y, &s) in labels.iter().zip(scores) {
            acc.add(y, s, 1.0);
        }
        acc.extract()
    }
}

/// Create / add / merge / extract. `merge` must be associative and
/// commutative with the freshly created accumulator as identity.
pub trait Combiner {
    fn add(&mut self, label: bool, score: f64, weight: f64);
    fn merge(&mut self, other: &Self);
    /// `None` when the metric is undefined on the accumulated sample.
    fn extract(&self) -> Option<f64>;
}

#[inline]
fn check_example(score: f64, weight: f64) {
    assert!((0.0..=1.0).contains(&score), "score {score} outside [0, 1]");
    assert!(weight.is_finite() && weight >= 0.0, "weight {weight} must be finite and >= 0");
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Weighted confusion matrix at a decision threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Confusion {
    kind: MetricKind,
    threshold: f64,
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl Confusion {
    fn new(kind: MetricKind, threshold: f64) -> Self {
        Self {
            kind,
            threshold,
            tp: 0.0,
            fp: 0.0,
            tn: 0.0,
            fn_: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

impl Combiner for Confusion {
    #[inline]
    fn add(&mut self, label: bool, score: f64, weight: f64) {
        check_example(score, weight);
        let predicted = score >= self.threshold;
        let cell = match (label, predicted) {
            (true, true) => &mut self.tp,
            (false, true) => &mut self.fp,
            (false, false) => &mut self.tn,
            (true, false) => &mut self.fn_,
        };
        *cell += weight;
    }

    fn merge(&mut self, other: &Self) {
        assert!(
            self.kind == other.kind && self.threshold == other.threshold,
            "merging accumulators of different metrics"
        );
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    fn extract(&self) -> Option<f64> {
        match self.kind {
            MetricKind::Accuracy => ratio(self.tp + self.tn, self.total()),
            MetricKind::Precision => self.precision(),
            MetricKind::Recall => self.recall(),
            MetricKind::F1 => {
                let (p, r) = (self.precision()?, self.recall()?);
                ratio(2.0 * p * r, p + r)
            }
            _ => unreachable!("confusion accumulator for {}", self.kind),
        }
    }
}

/// Per-bucket positive and negative weights over uniform score buckets.
/// Pairs within one bucket count as ties.
#[derive(Clone, Debug, PartialEq)]
pub struct AucHistogram {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl AucHistogram {
    fn new(buckets: usize) -> Self {
        Self {
            pos: vec![0.0; buckets],
            neg: vec![0.0; buckets],
        }
    }

    #[inline]
    fn bucket(&self, score: f64) -> usize {
        let n = self.pos.len();
        ((score * n as f64) as usize).min(n - 1)
    }
}

impl Combiner for AucHistogram {
    #[inline]
    fn add(&mut self, label: bool, score: f64, weight: f64) {
        check_example(score, weight);
        let b = self.bucket(score);
        if label {
            self.pos[b] += weight;
        } else {
            self.neg[b] += weight;
        }
    }

    fn merge(&mut self, other: &Self) {
        assert_eq!(self.pos.len(), other.pos.len(), "merging AUC accumulators of different sizes");
        for (a, b) in self.pos.iter_mut().zip(&other.pos) {
            *a += b;
        }
        for (a, b) in self.neg.iter_mut().zip(&other.neg) {
            *a += b;
        }
    }

    fn extract(&self) -> Option<f64> {
        let total_pos: f64 = self.pos.iter().sum();
        let total_neg: f64 = self.neg.iter().sum();
        if total_pos <= 0.0 || total_neg <= 0.0 {
            return None;
        }
        // Walk buckets from the top; each negative is beaten by every
        // positive in a higher bucket and ties half of those in its own.
        let mut pos_above = 0.0;
        let mut concordant = 0.0;
        for (p, n) in self.pos.iter().zip(&self.neg).rev() {
            concordant += n * (pos_above + 0.5 * p);
            pos_above += p;
        }
        Some(concordant / (total_pos * total_neg))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogLossSum {
    loss: f64,
    weight: f64,
}

impl Combiner for LogLossSum {
    #[inline]
    fn add(&mut self, label: bool, score: f64, weight: f64) {
        check_example(score, weight);
        if weight == 0.0 {
            return;
        }
        let s = score.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        let l = if label { -s.ln() } else { -(1.0 - s).ln() };
        self.loss += weight * l;
        self.weight += weight;
    }

    fn merge(&mut self, other: &Self) {
        self.loss += other.loss;
        self.weight += other.weight;
    }

    fn extract(&self) -> Option<f64> {
        ratio(self.loss, self.weight)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricAccumulator {
    Confusion(Confusion),
    Auc(AucHistogram),
    LogLoss(LogLossSum),
}

impl Combiner for MetricAccumulator {
    #[inline]
    fn add(&mut self, label: bool, score: f64, weight: f64) {
        match self {
            MetricAccumulator::Confusion(c) => c.add(label, score, weight),
            MetricAccumulator::Auc(c) => c.add(label, score, weight),
            MetricAccumulator::LogLoss(c) => c.add(label, score, weight),
        }
    }

    fn merge(&mut self, other: &Self) {
        match (self, other) {
            (MetricAccumulator::Confusion(a), MetricAccumulator::Confusion(b)) => a.merge(b),
            (MetricAccumulator::Auc(a), MetricAccumulator::Auc(b)) => a.merge(b),
            (MetricAccumulator::LogLoss(a), MetricAccumulator::LogLoss(b)) => a.merge(b),
            _ => panic!("merging accumulators of different metrics"),
        }
    }

    fn extract(&self) -> Option<f64> {
        match self {
            MetricAccumulator::Confusion(c) => c.extract(),
            MetricAccumulator::Auc(c) => c.extract(),
            MetricAccumulator::LogLoss(c) => c.extract(),
        }
    }
}
