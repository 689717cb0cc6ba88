//! Machine-readable slice reports (one JSON object per line) and the
//! human-readable run summary.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::lattice::Predicate;
use crate::schema::FeatureSchema;
use crate::search::{EvaluatedSlice, SearchReport, SliceOutcome};
use crate::stats::Direction;

/// Rounds to 9 significant digits. Non-finite values become `None`.
pub fn round_sig9(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    format!("{x:.8e}").parse().ok()
}

fn round_opt(x: Option<f64>) -> Option<f64> {
    x.and_then(round_sig9)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRecord {
    pub predicate: String,
    pub cross_size: usize,
    pub slice_size: usize,
    /// Point metric per model id.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub delta: Option<f64>,
    pub replicate_mean: Option<f64>,
    pub replicate_sd: Option<f64>,
    pub usable_replicates: usize,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub direction: Direction,
    pub significant: bool,
    pub status: SliceOutcome,
    pub iteration: usize,
}

impl ReportRecord {
    pub fn new(slice: &EvaluatedSlice, schema: &FeatureSchema, model_ids: &[String]) -> Self {
        let s = &slice.stat;
        Self {
            predicate: s.predicate.display(schema).to_string(),
            cross_size: s.predicate.cross_size(),
            slice_size: s.size,
            metrics: model_ids
                .iter()
                .cloned()
                .zip(s.point_metrics.iter().map(|m| round_opt(*m)))
                .collect(),
            delta: round_opt(s.point_delta),
            replicate_mean: round_opt(s.test.map(|t| t.mean)),
            replicate_sd: round_opt(s.test.map(|t| t.sd)),
            usable_replicates: s.test.map_or(0, |t| t.usable),
            t: round_opt(s.test.and_then(|t| t.t)),
            p_value: round_opt(s.p_value()),
            direction: s.direction,
            significant: slice.outcome == SliceOutcome::Significant,
            status: slice.outcome,
            iteration: slice.iteration,
        }
    }
}

/// Records to write: every evaluated slice when `verbose`, else the maximal
/// significant ones. Sorted by cross size, then predicate.
pub fn report_records(
    report: &SearchReport,
    schema: &FeatureSchema,
    model_ids: &[String],
    verbose: bool,
) -> Vec<ReportRecord> {
    let mut slices: Vec<&EvaluatedSlice> = if verbose {
        report.evaluated.iter().collect()
    } else {
        report.maximal()
    };
    slices.sort_by(|a, b| {
        let (pa, pb): (&Predicate, &Predicate) = (&a.stat.predicate, &b.stat.predicate);
        pa.cross_size().cmp(&pb.cross_size()).then_with(|| pa.cmp(pb))
    });
    slices
        .into_iter()
        .map(|s| ReportRecord::new(s, schema, model_ids))
        .collect()
}

pub fn write_records<W: Write>(mut out: W, records: &[ReportRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Totals printed after a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub strategy: String,
    pub rows: usize,
    pub significant_found: usize,
    pub reported: usize,
    pub candidates_evaluated: usize,
    pub iterations: usize,
    pub k_per_iter: Option<usize>,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn new(report: &SearchReport, rows: usize, reported: usize) -> Self {
        Self {
            strategy: report.strategy.to_string(),
            rows,
            significant_found: report.maximal().len(),
            reported,
            candidates_evaluated: report.candidates_evaluated,
            iterations: report.iterations.len(),
            k_per_iter: report.k_per_iter,
            cpu_seconds: report.cpu_seconds,
            wall_seconds: report.wall_seconds,
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "strategy              {}", self.strategy)?;
        writeln!(f, "rows                  {}", self.rows)?;
        if let Some(k) = self.k_per_iter {
            writeln!(f, "K per iteration       {k}")?;
        }
        writeln!(f, "iterations            {}", self.iterations)?;
        writeln!(f, "significant slices    {}", self.significant_found)?;
        writeln!(f, "candidates evaluated  {}", self.candidates_evaluated)?;
        writeln!(f, "records written       {}", self.reported)?;
        writeln!(f, "cpu time (s)          {:.3}", self.cpu_seconds)?;
        write!(f, "wall time (s)         {:.3}", self.wall_seconds)
    }
}
