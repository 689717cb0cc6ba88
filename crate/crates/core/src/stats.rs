//! Student-t testing of bootstrap replicate deltas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::evaluator::SliceEvaluation;
use crate::lattice::Predicate;

/// How the replicate vector is turned into a t statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TForm {
    /// `mean / sd`: the replicate spread is the standard error of the
    /// slice's delta.
    #[default]
    BootstrapSe,
    /// `mean / (sd / sqrt(n))`: one-sample t test of the replicate mean.
    ReplicateMean,
}

impl FromStr for TForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bootstrap-se" => Ok(TForm::BootstrapSe),
            "replicate-mean" => Ok(TForm::ReplicateMean),
            _ => Err(format!("unknown t statistic `{s}` (bootstrap-se, replicate-mean)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Higher,
    None,
}

/// Which sign of delta counts as significant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WantedDirection {
    #[default]
    Lower,
    Higher,
    Any,
}

impl WantedDirection {
    pub fn admits(self, d: Direction) -> bool {
        match self {
            WantedDirection::Any => true,
            WantedDirection::Lower => d == Direction::Lower,
            WantedDirection::Higher => d == Direction::Higher,
        }
    }
}

impl FromStr for WantedDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower" => Ok(WantedDirection::Lower),
            "higher" => Ok(WantedDirection::Higher),
            "any" => Ok(WantedDirection::Any),
            _ => Err(format!("unknown direction `{s}` (lower, higher, any)")),
        }
    }
}

impl fmt::Display for WantedDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WantedDirection::Lower => "lower",
            WantedDirection::Higher => "higher",
            WantedDirection::Any => "any",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least 2 usable replicates, got {0}")]
    Untestable(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TValue {
    Finite(f64),
    /// Zero replicate spread.
    Degenerate,
}

/// Sample mean and standard deviation (divisor `n - 1`).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn t_statistic(deltas: &[f64], form: TForm) -> Result<TValue, StatsError> {
    if deltas.len() < 2 {
        return Err(StatsError::Untestable(deltas.len()));
    }
    let (mean, sd) = mean_sd(deltas);
    if sd == 0.0 {
        return Ok(TValue::Degenerate);
    }
    let se = match form {
        TForm::BootstrapSe => sd,
        TForm::ReplicateMean => sd / (deltas.len() as f64).sqrt(),
    };
    Ok(TValue::Finite(mean / se))
}

/// Two-sided Student-t tail probability `P(|T| >= |t|)` with `df` degrees
/// of freedom, via `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn p_value(t: f64, df: f64) -> f64 {
    assert!(df >= 1.0, "df must be >= 1, got {df}");
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Result of testing one replicate vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub mean: f64,
    pub sd: f64,
    pub usable: usize,
    /// `None` when degenerate.
    pub t: Option<f64>,
    pub p_value: f64,
}

pub fn t_test(deltas: &[f64], form: TForm) -> Result<TTest, StatsError> {
    let t = t_statistic(deltas, form)?;
    let (mean, sd) = mean_sd(deltas);
    let (t, p_value) = match t {
        TValue::Finite(t) => (Some(t), p_value(t, (deltas.len() - 1) as f64)),
        TValue::Degenerate if mean != 0.0 => (None, 0.0),
        TValue::Degenerate => (None, 1.0),
    };
    Ok(TTest {
        mean,
        sd,
        usable: deltas.len(),
        t,
        p_value,
    })
}

pub fn direction_of(mean: f64) -> Direction {
    if mean < 0.0 {
        Direction::Lower
    } else if mean > 0.0 {
        Direction::Higher
    } else {
        Direction::None
    }
}

/// Significance decision: strict `p < alpha` and the wanted direction.
pub fn is_significant(p_value: f64, direction: Direction, alpha: f64, wanted: WantedDirection) -> bool {
    p_value < alpha && wanted.admits(direction)
}

/// Per-slice test outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceStat {
    pub predicate: Predicate,
    pub size: usize,
    pub point_delta: Option<f64>,
    pub point_metrics: Vec<Option<f64>>,
    /// `None` when fewer than two replicates were usable.
    pub test: Option<TTest>,
    pub dropped_replicates: usize,
    pub direction: Direction,
    pub significant: bool,
}

impl SliceStat {
    pub fn testable(&self) -> bool {
        self.test.is_some()
    }

    pub fn p_value(&self) -> Option<f64> {
        self.test.map(|t| t.p_value)
    }
}

pub fn classify(eval: &SliceEvaluation, alpha: f64, wanted: WantedDirection, form: TForm) -> SliceStat {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let test = t_test(&eval.deltas, form).ok();
    let direction = test.map_or(Direction::None, |t| direction_of(t.mean));
    let significant = test.is_some_and(|t| is_significant(t.p_value, direction, alpha, wanted));
    SliceStat {
        predicate: eval.predicate.clone(),
        size: eval.size,
        point_delta: eval.point_delta,
        point_metrics: eval.point_metrics.clone(),
        test,
        dropped_replicates: eval.dropped_replicates,
        direction,
        significant,
    }
}
