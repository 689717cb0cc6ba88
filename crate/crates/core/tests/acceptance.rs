//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use slicefind_core::config::{run, ConfigOverrides, RunConfig};
use slicefind_core::lattice::enumerate_layer;
use slicefind_core::schema::{encode, infer_schema, RawColumn};
use slicefind_core::search::{run_batch, run_iterative, run_priority, SearchReport, SliceOutcome};
use slicefind_core::synth::{generate, FeatureGen, PlantedSlice, Synthetic, SyntheticSpec};
use slicefind_core::timing::thread_cpu_seconds;
use slicefind_core::{
    is_subslice, Direction, EncodedDataset, EvalSettings, Evaluator, FeatureSchema, Metric, MetricKind,
    Predicate, PredictionSet, PriorityScore, RawDataset, SearchConfig, Strategy, TForm, WantedDirection,
};

// Tolerances and thresholds.
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_BUDGET_SECS: f64 = 60.0;
const AUC_TOL: f64 = 1.0 / 128.0;
const RECALL_MIN: f64 = 0.95;
const NULL_FRACTION_MAX: f64 = 0.05;
const NULL_MIN_TESTABLE: usize = 500;
const RATE_ERROR_MAX: f64 = 0.3;
const R2_MIN: f64 = 0.95;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Reference metric implementations (direct formulas, no accumulators).

fn bucket(score: f64) -> usize {
    ((score * 128.0) as usize).min(127)
}

fn reference_metric(kind: MetricKind, labels: &[bool], scores: &[f64]) -> Option<f64> {
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
    let count = |f: &dyn Fn(bool, bool) -> bool| {
        labels.iter().zip(&predicted).filter(|(&y, &p)| f(y, p)).count() as f64
    };
    let tp = count(&|y, p| y && p);
    let fp = count(&|y, p| !y && p);
    let fn_ = count(&|y, p| y && !p);
    let n = labels.len() as f64;
    let div = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    match kind {
        MetricKind::Accuracy => div(count(&|y, p| y == p), n),
        MetricKind::Precision => div(tp, tp + fp),
        MetricKind::Recall => div(tp, tp + fn_),
        MetricKind::F1 => {
            let (p, r) = (div(tp, tp + fp)?, div(tp, tp + fn_)?);
            div(2.0 * p * r, p + r)
        }
        MetricKind::LogLoss => {
            let total: f64 = labels
                .iter()
                .zip(scores)
                .map(|(&y, &s)| {
                    let s = s.clamp(1e-7, 1.0 - 1e-7);
                    if y { -s.ln() } else { -(1.0 - s).ln() }
                })
                .sum();
            div(total, n)
        }
        MetricKind::Auc => {
            // Pairwise over bucket indices: equal buckets tie.
            let pos: Vec<usize> = labels.iter().zip(scores).filter(|p| *p.0).map(|p| bucket(*p.1)).collect();
            let neg: Vec<usize> = labels.iter().zip(scores).filter(|p| !*p.0).map(|p| bucket(*p.1)).collect();
            let mut c = 0.0;
            for &a in &pos {
                for &b in &neg {
                    c += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                }
            }
            div(c, pos.len() as f64 * neg.len() as f64)
        }
    }
}

/// Exact AUC by midranks (Mann-Whitney U).
fn exact_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let rank_sum: f64 = labels.iter().zip(&ranks).filter(|p| *p.0).map(|p| p.1).sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

// ---------------------------------------------------------------------------
// 1. Oracle metric equivalence.

fn random_dataset(rng: &mut ChaCha8Rng) -> (FeatureSchema, EncodedDataset) {
    let rows = rng.random_range(30..=1000);
    let n_features = rng.random_range(1..=6);
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for f in 0..n_features {
        names.push(format!("f{f}"));
        if rng.random_bool(0.3) {
            columns.push(RawColumn::Numeric(
                (0..rows)
                    .map(|_| (!rng.random_bool(0.05)).then(|| rng.random_range(-5.0..5.0)))
                    .collect(),
            ));
        } else {
            let card = rng.random_range(2..=5);
            columns.push(RawColumn::Categorical(
                (0..rows)
                    .map(|_| (!rng.random_bool(0.05)).then(|| format!("c{}", rng.random_range(0..card))))
                    .collect(),
            ));
        }
    }
    let labels: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.4)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&y| {
            let s: f64 = rng.random();
            if rng.random_bool(0.7) { if y { 0.5 + s / 2.0 } else { s / 2.0 } } else { s }
        })
        .collect();
    let raw = RawDataset::new(names, columns, labels).unwrap();
    let schema = infer_schema(&raw, 4, 4).unwrap();
    let data = encode(&raw, vec![PredictionSet::new("m", scores).unwrap()], &schema).unwrap();
    (schema, data)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut slices, mut worst) = (0usize, 0.0f64);
    let mut mismatch = None;
    for d in 0..25 {
        let (schema, data) = random_dataset(&mut rng);
        let kind = MetricKind::ALL[d % MetricKind::ALL.len()];
        let max_l = schema.n_features().min(3);
        let candidates: Vec<Predicate> = (1..=max_l).flat_map(|l| enumerate_layer(&schema, l)).collect();
        let settings = EvalSettings {
            metric: Metric::new(kind),
            diff: Default::default(),
            replicates: 2,
            seed: d as u64,
            workers: 1 + d % 3,
        };
        let outcome = Evaluator::new(&data, settings).unwrap().evaluate(&candidates);
        for p in &candidates {
            let rows: Vec<usize> = (0..data.n_rows()).filter(|&r| p.matches(data.row(r))).collect();
            let got = outcome.slices.get(p);
            if rows.is_empty() {
                if got.is_some() {
                    mismatch = Some(format!("dataset {d}: empty slice {p:?} reported"));
                }
                continue;
            }
            slices += 1;
            let labels: Vec<bool> = rows.iter().map(|&r| data.label(r)).collect();
            let scores: Vec<f64> = rows.iter().map(|&r| data.score(0, r)).collect();
            let want = reference_metric(kind, &labels, &scores);
            let Some(got) = got else {
                mismatch = Some(format!("dataset {d}: nonempty slice {p:?} missing"));
                continue;
            };
            if got.size != rows.len() {
                mismatch = Some(format!("dataset {d}: size of {p:?}"));
            }
            match (got.point_metrics[0], want) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                (a, b) => mismatch = Some(format!("dataset {d} {kind}: {p:?} {a:?} vs {b:?}")),
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = mismatch.is_none() && worst <= ORACLE_TOL && secs < ORACLE_BUDGET_SECS;
    outcome(
        pass,
        format!(
            "{slices} slices on 25 datasets, max |diff| {worst:.2e} (tol {ORACLE_TOL:.0e}), {secs:.1}s (< {ORACLE_BUDGET_SECS}s){}",
            mismatch.map(|m| format!(", {m}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. AUC approximation.

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let metric = Metric::new(MetricKind::Auc);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // n log-uniform in [100, 10^4].
        let n = 10f64.powf(rng.random_range(2.0..=4.0)).round() as usize;
        let separation = rng.random_range(0.0..2.0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let positive_rate = rng.random_range(0.2..0.8);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(positive_rate)).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let z: f64 = noise.sample(&mut rng) + if y { separation } else { 0.0 };
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
            continue;
        }
        let got = metric.compute(&labels, &scores).unwrap();
        worst = worst.max((got - exact_auc(&labels, &scores)).abs());
    }
    let example = metric.compute(&[true, false, true, false], &[0.6, 0.55, 0.4, 0.3]);
    let pass = worst <= AUC_TOL && example == Some(0.75);
    outcome(
        pass,
        format!("max |bucketed - exact| {worst:.5} (tol 1/128 = {AUC_TOL:.5}); [1,0,1,0] example {example:?} (want 0.75)"),
    )
}

// ---------------------------------------------------------------------------
// 3. Strategy equivalence.

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut sizes = Vec::new();
    for seed in 0..10u64 {
        let mut spec = SyntheticSpec::uniform(2000, 5, 3, seed);
        spec.planted = vec![
            PlantedSlice { conditions: vec![(0, 0), (1, 1)], accuracy: 0.35 },
            PlantedSlice { conditions: vec![(2, 2), (3, 0), (4, 1)], accuracy: 0.1 },
        ];
        let (schema, data) = generate(&spec).encode(10).unwrap();
        let cfg = SearchConfig {
            seed,
            max_cross_size: 3,
            k_per_iter: Some(usize::MAX),
            iterations: 3,
            ..Default::default()
        };
        let batch = run_batch(&cfg, &schema, &data).unwrap().maximal_predicates();
        let iterative = run_iterative(&cfg, &schema, &data).unwrap().maximal_predicates();
        let priority = run_priority(&cfg, &schema, &data).unwrap().maximal_predicates();
        sizes.push(batch.len());
        if batch != iterative || batch != priority {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!("10 datasets, maximal set sizes {sizes:?}, mismatching seeds {failures:?}"),
    )
}

// ---------------------------------------------------------------------------
// 4. Planted-slice recall.

fn planted_spec(seed: u64) -> SyntheticSpec {
    let cat = |name: &str, cardinality| FeatureGen::Categorical {
        name: name.into(),
        cardinality,
        zipf_exponent: None,
    };
    SyntheticSpec {
        rows: 2000,
        features: vec![cat("f0", 3), cat("f1", 2), cat("f2", 3), cat("f3", 3)],
        base_accuracy: 0.85,
        // Accuracy lowered by 0.4 inside f0=v0 AND f1=v1 (about 333 rows).
        planted: vec![PlantedSlice { conditions: vec![(0, 0), (1, 1)], accuracy: 0.45 }],
        baseline_accuracy: None,
        seed,
    }
}

fn found_planted(report: &SearchReport, planted: &Predicate) -> bool {
    report.maximal().iter().any(|e| {
        is_subslice(planted, &e.stat.predicate) && e.stat.direction == Direction::Lower && !e.stat.predicate.is_overall()
    })
}

fn criterion_4() -> Outcome {
    let mut hits = [0usize; 3];
    let mut min_size = usize::MAX;
    for seed in 0..20u64 {
        let syn = generate(&planted_spec(seed));
        let (schema, data) = syn.encode(10).unwrap();
        let planted = syn.planted_predicate(&schema, 0).unwrap();
        let size = (0..data.n_rows()).filter(|&r| planted.matches(data.row(r))).count();
        min_size = min_size.min(size);
        let cfg = SearchConfig {
            seed,
            alpha: 0.01,
            replicates: 20,
            ..Default::default()
        };
        for (i, strategy) in [Strategy::Batch, Strategy::Iterative, Strategy::Priority].into_iter().enumerate() {
            let cfg = SearchConfig { strategy, ..cfg.clone() };
            let report = slicefind_core::search::run_search(&cfg, &schema, &data).unwrap();
            hits[i] += found_planted(&report, &planted) as usize;
        }
    }
    let recalls = hits.map(|h| h as f64 / 20.0);
    let pass = recalls.iter().all(|&r| r >= RECALL_MIN) && min_size >= 200;
    outcome(
        pass,
        format!(
            "recall batch/iterative/priority {:.2}/{:.2}/{:.2} over 20 runs (min {RECALL_MIN}); smallest planted slice {min_size} rows (min 200)",
            recalls[0], recalls[1], recalls[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Null calibration.

fn null_fraction(form: TForm) -> (usize, usize) {
    let (mut significant, mut testable) = (0, 0);
    for seed in 0..10u64 {
        let (schema, data) = generate(&SyntheticSpec::uniform(2000, 5, 4, 500 + seed)).encode(10).unwrap();
        let cfg = SearchConfig {
            seed,
            max_cross_size: 2,
            alpha: 0.01,
            direction: WantedDirection::Any,
            t_form: form,
            ..Default::default()
        };
        let r = run_batch(&cfg, &schema, &data).unwrap();
        testable += r.evaluated.iter().filter(|e| e.stat.testable()).count();
        significant += r.significant().count();
    }
    (significant, testable)
}

fn criterion_5() -> Outcome {
    let (sig, testable) = null_fraction(TForm::BootstrapSe);
    let frac = sig as f64 / testable as f64;
    let (lit_sig, lit_testable) = null_fraction(TForm::ReplicateMean);
    let pass = frac <= NULL_FRACTION_MAX && testable >= NULL_MIN_TESTABLE;
    outcome(
        pass,
        format!(
            "{sig}/{testable} = {frac:.4} significant at alpha 0.01 (max {NULL_FRACTION_MAX}); replicate-mean t form would give {:.4}",
            lit_sig as f64 / lit_testable as f64
        ),
    )
}

// ---------------------------------------------------------------------------
// 6 and 7. Priority effectiveness and nonempty-rate estimation.

fn multi_planted(seed: u64) -> Synthetic {
    // Ten cells over distinct feature values, so no singleton is shared.
    let pairs = [(0, 1), (2, 3), (4, 5), (0, 2), (1, 3), (4, 0), (5, 1), (2, 4), (3, 5), (0, 3)];
    let mut next = [0usize; 6];
    let mut take = |f: usize| {
        next[f] += 1;
        next[f] - 1
    };
    let mut spec = SyntheticSpec::uniform(5000, 6, 8, seed);
    spec.base_accuracy = 0.85;
    spec.planted = pairs
        .iter()
        .map(|&(a, b)| PlantedSlice {
            conditions: vec![(a, take(a)), (b, take(b))],
            accuracy: 0.45,
        })
        .collect();
    generate(&spec)
}

/// Candidates evaluated until `share` of `targets` were found significant.
fn candidates_to_reach(report: &SearchReport, targets: &BTreeSet<Predicate>, share: f64) -> Option<usize> {
    let need = (share * targets.len() as f64).ceil() as usize;
    let mut found = 0;
    for it in &report.iterations {
        found += report
            .evaluated
            .iter()
            .filter(|e| e.iteration == it.iteration && e.outcome == SliceOutcome::Significant)
            .filter(|e| targets.contains(&e.stat.predicate))
            .count();
        if found >= need {
            return Some(it.cumulative_candidates);
        }
    }
    None
}

struct PriorityRuns {
    mean_candidates: [f64; 3],
    unreached: usize,
    batch_sizes: Vec<usize>,
    rate_errors: Vec<f64>,
}

fn priority_runs() -> PriorityRuns {
    let scores = [PriorityScore::PValue, PriorityScore::Random, PriorityScore::BreadthFirst];
    let mut totals = [0.0; 3];
    let mut unreached = 0;
    let mut batch_sizes = Vec::new();
    let mut rate_errors = Vec::new();
    for seed in 0..10u64 {
        let (schema, data) = multi_planted(seed).encode(10).unwrap();
        let base = SearchConfig {
            seed,
            max_cross_size: 2,
            alpha: 0.001,
            k_per_iter: Some(100),
            iterations: 1000,
            ..Default::default()
        };
        let targets = run_batch(&base, &schema, &data).unwrap().maximal_predicates();
        batch_sizes.push(targets.len());
        for (i, score) in scores.into_iter().enumerate() {
            let cfg = SearchConfig { priority_score: score, ..base.clone() };
            let r = run_priority(&cfg, &schema, &data).unwrap();
            match candidates_to_reach(&r, &targets, 0.9) {
                Some(c) => totals[i] += c as f64,
                None => {
                    unreached += 1;
                    totals[i] += f64::INFINITY;
                }
            }
            if score == PriorityScore::PValue {
                for it in r.iterations.iter().skip(1) {
                    let est = it.estimated_nonempty.unwrap();
                    rate_errors.push((est - it.nonempty as f64).abs() / it.nonempty.max(1) as f64);
                }
            }
        }
    }
    PriorityRuns {
        mean_candidates: totals.map(|t| t / 10.0),
        unreached,
        batch_sizes,
        rate_errors,
    }
}

fn criterion_6(runs: &PriorityRuns) -> Outcome {
    let [p, r, b] = runs.mean_candidates;
    let pass = runs.unreached == 0 && p <= r && p <= b;
    outcome(
        pass,
        format!(
            "mean candidates to 90% of batch maximal set: p-value {p:.0}, random {r:.0}, breadth-first {b:.0}; batch set sizes {:?}",
            runs.batch_sizes
        ),
    )
}

/// Mean relative error of the nonempty estimate on a sparse dataset, where
/// many refinements are empty.
fn sparse_rate_error() -> f64 {
    let (schema, data) = sparse(3).encode(10).unwrap();
    let cfg = SearchConfig {
        strategy: Strategy::Priority,
        max_cross_size: 3,
        k_per_iter: Some(500),
        iterations: 20,
        ..Default::default()
    };
    let r = run_priority(&cfg, &schema, &data).unwrap();
    let errs: Vec<f64> = r
        .iterations
        .iter()
        .skip(1)
        .map(|it| (it.estimated_nonempty.unwrap() - it.nonempty as f64).abs() / it.nonempty.max(1) as f64)
        .collect();
    errs.iter().sum::<f64>() / errs.len().max(1) as f64
}

fn criterion_7(runs: &PriorityRuns) -> Outcome {
    let mean = runs.rate_errors.iter().sum::<f64>() / runs.rate_errors.len() as f64;
    let max = runs.rate_errors.iter().copied().fold(0.0, f64::max);
    let pass = !runs.rate_errors.is_empty() && mean <= RATE_ERROR_MAX;
    outcome(
        pass,
        format!(
            "mean |est - actual| / actual {mean:.3} over {} rounds (max {RATE_ERROR_MAX}), worst round {max:.3}; sparse Zipf data: {:.3}",
            runs.rate_errors.len(),
            sparse_rate_error()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. N_min monotonicity.

fn sparse(seed: u64) -> Synthetic {
    let spec = SyntheticSpec {
        rows: 3000,
        features: (0..5)
            .map(|i| FeatureGen::Categorical {
                name: format!("z{i}"),
                cardinality: 30,
                zipf_exponent: Some(1.2),
            })
            .collect(),
        base_accuracy: 0.8,
        planted: Vec::new(),
        baseline_accuracy: None,
        seed,
    };
    generate(&spec)
}

fn criterion_8() -> Outcome {
    let (schema, data) = sparse(8).encode(10).unwrap();
    let counts: Vec<usize> = [1, 50, 100]
        .into_iter()
        .map(|n| {
            let cfg = SearchConfig {
                min_slice_size: n,
                ..Default::default()
            };
            run_iterative(&cfg, &schema, &data).unwrap().candidates_evaluated
        })
        .collect();
    let pass = counts[0] > counts[1] && counts[1] > counts[2];
    outcome(pass, format!("iterative candidates at N_min 1/50/100: {counts:?} (strictly decreasing)"))
}

// ---------------------------------------------------------------------------
// 9. Scalability shape.

fn criterion_9() -> Outcome {
    let syn = generate(&SyntheticSpec::uniform(40_000, 5, 6, 9));
    let schema = infer_schema(&syn.raw, 100, 10).unwrap();
    let candidates: Vec<Predicate> = (1..=2).flat_map(|l| enumerate_layer(&schema, l)).collect();
    let settings = EvalSettings {
        metric: Metric::new(MetricKind::Accuracy),
        diff: Default::default(),
        replicates: 20,
        seed: 9,
        workers: 1,
    };
    let mut points = Vec::new();
    for times in [1usize, 2, 4] {
        let raw = syn.raw.replicated(times);
        let data = encode(&raw, vec![syn.predictions.replicated(times)], &schema).unwrap();
        let evaluator = Evaluator::new(&data, settings).unwrap();
        let best = (0..3)
            .map(|_| {
                let t0 = thread_cpu_seconds();
                std::hint::black_box(evaluator.evaluate(&candidates));
                thread_cpu_seconds() - t0
            })
            .fold(f64::INFINITY, f64::min);
        points.push((data.n_rows() as f64, best));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let times: Vec<String> = points.iter().map(|p| format!("{}: {:.3}s", p.0, p.1)).collect();
    outcome(r2 >= R2_MIN, format!("R^2 {r2:.4} (min {R2_MIN}); cpu {}", times.join(", ")))
}

// ---------------------------------------------------------------------------
// 10. Determinism.

fn write_csvs(dir: &Path, syn: &Synthetic) {
    let mut data = format!("{},label\n", syn.raw.feature_names.join(","));
    for r in 0..syn.raw.n_rows() {
        for c in &syn.raw.columns {
            if let RawColumn::Categorical(v) = c {
                data.push_str(v[r].as_deref().unwrap_or(""));
            }
            data.push(',');
        }
        data.push_str(if syn.raw.labels[r] { "1\n" } else { "0\n" });
    }
    fs::write(dir.join("data.csv"), data).unwrap();
    let mut preds = String::from("row_index,score\n");
    for (i, s) in syn.predictions.scores.iter().enumerate() {
        preds.push_str(&format!("{i},{s}\n"));
    }
    fs::write(dir.join("pred.csv"), preds).unwrap();
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_csvs(dir.path(), &generate(&planted_spec(10)));
    let mut identical = Vec::new();
    for strategy in [Strategy::Batch, Strategy::Iterative, Strategy::Priority] {
        let bytes: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let output = dir.path().join(format!("{strategy}-{i}.jsonl"));
                let config = RunConfig::resolve(ConfigOverrides {
                    data: Some(dir.path().join("data.csv")),
                    predictions: Some(dir.path().join("pred.csv")),
                    output: Some(output.clone()),
                    strategy: Some(strategy),
                    seed: Some(42),
                    workers: Some(1),
                    verbose: Some(true),
                    ..Default::default()
                })
                .unwrap();
                run(&config, None).unwrap();
                fs::read(output).unwrap()
            })
            .collect();
        identical.push(!bytes[0].is_empty() && bytes[0] == bytes[1]);
    }
    outcome(
        identical.iter().all(|&x| x),
        format!("byte-identical verbose reports batch/iterative/priority: {identical:?}"),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "oracle metric equivalence", criterion_1()),
        (2, "AUC approximation", criterion_2()),
        (3, "strategy equivalence", criterion_3()),
        (4, "planted-slice recall", criterion_4()),
        (5, "null calibration", criterion_5()),
    ];
    let runs = priority_runs();
    results.push((6, "priority effectiveness", criterion_6(&runs)));
    results.push((7, "nonempty-rate estimation", criterion_7(&runs)));
    results.push((8, "N_min monotonicity", criterion_8()));
    results.push((9, "scalability shape", criterion_9()));
    results.push((10, "determinism", criterion_10()));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n:>2} {name:<28} {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("{} passed, {failed} failed in {:.1}s", results.len() - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
