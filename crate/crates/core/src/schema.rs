//! Dataset ingestion, schema inference and discrete encoding.
//!
//! A [`RawDataset`] holds typed feature columns plus binary labels. Schema
//! inference turns every column into a small discrete domain: categorical
//! columns keep their `top_j` most frequent values and fold the rest into a
//! single OTHER bucket, numeric columns are cut into equal-population bins.
//! [`encode`] then maps every row onto those value ids, producing the
//! immutable [`EncodedDataset`] that the evaluator shares across workers.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

/// Value id used for a missing feature value. It matches no predicate.
pub const MISSING: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("feature `{0}` has no non-missing values")]
    EmptyFeature(String),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}: label `{value}` is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: feature `{feature}` has unencodable value {value}")]
    Unencodable {
        row: usize,
        feature: String,
        value: String,
    },
    #[error("row {row}: value `{value}` of feature `{feature}` is not in the schema")]
    UnknownCategory {
        row: usize,
        feature: String,
        value: String,
    },
    #[error("column `{0}` declared numeric but holds non-numeric value `{1}`")]
    NotNumeric(String, String),
    #[error("prediction set `{model}` has {got} scores, dataset has {expected} rows")]
    RowCountMismatch {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("prediction set `{model}`: {reason}")]
    BadPrediction { model: String, reason: String },
    #[error("feature count mismatch: schema has {schema}, dataset has {dataset}")]
    SchemaMismatch { schema: usize, dataset: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

/// One typed feature column. `None` marks a missing value.
#[derive(Clone, Debug, PartialEq)]
pub enum RawColumn {
    Categorical(Vec<Option<String>>),
    Numeric(Vec<Option<f64>>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Categorical(v) => v.len(),
            RawColumn::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            RawColumn::Categorical(_) => ColumnKind::Categorical,
            RawColumn::Numeric(_) => ColumnKind::Numeric,
        }
    }
}

/// Feature columns and binary labels. Row `i` of every column and of
/// `labels` is the example with row index `i`.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<bool>,
}

impl RawDataset {
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<RawColumn>,
        labels: Vec<bool>,
    ) -> Result<Self, IngestError> {
        if labels.is_empty() {
            return Err(IngestError::EmptyDataset);
        }
        if feature_names.len() != columns.len() {
            return Err(IngestError::InvalidParameter(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != labels.len() {
                return Err(IngestError::InvalidParameter(format!(
                    "column `{name}` has {} rows, labels have {}",
                    col.len(),
                    labels.len()
                )));
            }
        }
        Ok(Self {
            feature_names,
            columns,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// The dataset with every row repeated `times` times, in order.
    pub fn replicated(&self, times: usize) -> RawDataset {
        fn rep<T: Clone>(v: &[T], times: usize) -> Vec<T> {
            let mut out = Vec::with_capacity(v.len() * times);
            for _ in 0..times {
                out.extend_from_slice(v);
            }
            out
        }
        RawDataset {
            feature_names: self.feature_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| match c {
                    RawColumn::Categorical(v) => RawColumn::Categorical(rep(v, times)),
                    RawColumn::Numeric(v) => RawColumn::Numeric(rep(v, times)),
                })
                .collect(),
            labels: rep(&self.labels, times),
        }
    }
}

/// Scores of one model, indexed by row.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    pub model_id: String,
    pub scores: Vec<f64>,
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>, scores: Vec<f64>) -> Result<Self, IngestError> {
        let model_id = model_id.into();
        if let Some((row, s)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || **s < 0.0 || **s > 1.0)
        {
            return Err(IngestError::BadPrediction {
                model: model_id,
                reason: format!("row {row}: score {s} outside [0, 1]"),
            });
        }
        Ok(Self { model_id, scores })
    }

    pub fn replicated(&self, times: usize) -> PredictionSet {
        let mut scores = Vec::with_capacity(self.scores.len() * times);
        for _ in 0..times {
            scores.extend_from_slice(&self.scores);
        }
        PredictionSet {
            model_id: self.model_id.clone(),
            scores,
        }
    }
}

/// Discrete domain of a single feature.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureDomain {
    /// Retained values get ids `0..values.len()`; when `other` is present it
    /// lists the folded raw values and has id `values.len()`.
    Categorical {
        values: Vec<String>,
        other: Option<Vec<String>>,
    },
    /// Bin `k` is `[lower_edges[k], lower_edges[k + 1])`; the last bin is
    /// `[lower_edges[last], max]`, closed above.
    Numeric { lower_edges: Vec<f64>, max: f64 },
}

impl FeatureDomain {
    /// Number of distinct singleton value ids.
    pub fn size(&self) -> usize {
        match self {
            FeatureDomain::Categorical { values, other } => values.len() + other.is_some() as usize,
            FeatureDomain::Numeric { lower_edges, .. } => lower_edges.len(),
        }
    }

    pub fn other_id(&self) -> Option<u32> {
        match self {
            FeatureDomain::Categorical {
                values,
                other: Some(_),
            } => Some(values.len() as u32),
            _ => None,
        }
    }

    /// Half-open bin lookup; values outside the observed range clamp to the
    /// first or last bin.
    pub fn bin_of(&self, v: f64) -> Option<u32> {
        match self {
            FeatureDomain::Numeric { lower_edges, .. } => {
                let k = lower_edges.partition_point(|&e| e <= v);
                Some(k.saturating_sub(1) as u32)
            }
            FeatureDomain::Categorical { .. } => None,
        }
    }

    /// `[lo, hi)` of a bin, plus whether the upper end is closed.
    pub fn bin_range(&self, bin: u32) -> Option<(f64, f64, bool)> {
        match self {
            FeatureDomain::Numeric { lower_edges, max } => {
                let k = bin as usize;
                let lo = *lower_edges.get(k)?;
                match lower_edges.get(k + 1) {
                    Some(&hi) => Some((lo, hi, false)),
                    None => Some((lo, *max, true)),
                }
            }
            FeatureDomain::Categorical { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub domain: FeatureDomain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.domain.size()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

/// Ordered retained values plus the values folded into OTHER (`None` when
/// every distinct value is retained).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopJ {
    pub retained: Vec<String>,
    pub other: Option<Vec<String>>,
}

/// Keeps the `top_j` most frequent values; ties go to the lexicographically
/// smaller value. OTHER members are returned in ascending order.
pub fn top_j_categories(value_counts: &HashMap<String, usize>, top_j: usize) -> TopJ {
    let mut ranked: Vec<(&String, usize)> = value_counts.iter().map(|(v, &c)| (v, c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let retained: Vec<String> = ranked.iter().take(top_j).map(|(v, _)| (*v).clone()).collect();
    let other = if ranked.len() > top_j {
        let mut rest: Vec<String> = ranked[top_j..].iter().map(|(v, _)| (*v).clone()).collect();
        rest.sort();
        Some(rest)
    } else {
        None
    };
    TopJ { retained, other }
}

/// Lower bin edges at ranks `ceil(k * n / num_bins)` of the sorted values,
/// with duplicates collapsed. `sorted` must be ascending and non-empty.
pub fn quantile_edges(sorted: &[f64], num_bins: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::with_capacity(num_bins);
    for k in 0..num_bins {
        let rank = (k * n).div_ceil(num_bins);
        if rank >= n {
            break;
        }
        let v = sorted[rank];
        if edges.last().is_none_or(|&last| v > last) {
            edges.push(v);
        }
    }
    edges
}

pub fn infer_schema(
    dataset: &RawDataset,
    top_j: usize,
    num_bins: usize,
) -> Result<FeatureSchema, IngestError> {
    if top_j == 0 {
        return Err(IngestError::InvalidParameter("top_j must be >= 1".into()));
    }
    if num_bins == 0 {
        return Err(IngestError::InvalidParameter("num_bins must be >= 1".into()));
    }
    let mut features = Vec::with_capacity(dataset.n_features());
    for (name, column) in dataset.feature_names.iter().zip(&dataset.columns) {
        let domain = match column {
            RawColumn::Categorical(values) => {
                let mut counts: HashMap<String, usize> = HashMap::new();
                for v in values.iter().flatten() {
                    *counts.entry(v.clone()).or_default() += 1;
                }
                if counts.is_empty() {
                    return Err(IngestError::EmptyFeature(name.clone()));
                }
                let TopJ { retained, other } = top_j_categories(&counts, top_j);
                FeatureDomain::Categorical {
                    values: retained,
                    other,
                }
            }
            RawColumn::Numeric(values) => {
                let mut sorted: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
                if sorted.is_empty() {
                    return Err(IngestError::EmptyFeature(name.clone()));
                }
                sorted.sort_by(f64::total_cmp);
                FeatureDomain::Numeric {
                    lower_edges: quantile_edges(&sorted, num_bins),
                    max: *sorted.last().unwrap(),
                }
            }
        };
        features.push(FeatureSpec {
            name: name.clone(),
            domain,
        });
    }
    Ok(FeatureSchema { features })
}

/// Row-major discrete encoding of a dataset together with labels and one
/// score vector per model. Read-only once built.
#[derive(Clone, Debug)]
pub struct EncodedDataset {
    n_rows: usize,
    n_features: usize,
    codes: Vec<u32>,
    labels: Vec<bool>,
    scores: Vec<Vec<f64>>,
    model_ids: Vec<String>,
}

impl EncodedDataset {
    /// Builds an encoded dataset from pre-computed value ids. `codes` is row
    /// major with `n_features` entries per row.
    pub fn from_parts(
        n_features: usize,
        codes: Vec<u32>,
        labels: Vec<bool>,
        predictions: Vec<PredictionSet>,
    ) -> Result<Self, IngestError> {
        let n_rows = labels.len();
        if n_rows == 0 {
            return Err(IngestError::EmptyDataset);
        }
        if codes.len() != n_rows * n_features {
            return Err(IngestError::InvalidParameter(format!(
                "{} codes for {n_rows} rows x {n_features} features",
                codes.len()
            )));
        }
        for p in &predictions {
            if p.scores.len() != n_rows {
                return Err(IngestError::RowCountMismatch {
                    model: p.model_id.clone(),
                    expected: n_rows,
                    got: p.scores.len(),
                });
            }
        }
        let (model_ids, scores) = predictions.into_iter().map(|p| (p.model_id, p.scores)).unzip();
        Ok(Self {
            n_rows,
            n_features,
            codes,
            labels,
            scores,
            model_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_models(&self) -> usize {
        self.scores.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u32] {
        &self.codes[row * self.n_features..(row + 1) * self.n_features]
    }

    #[inline]
    pub fn label(&self, row: usize) -> bool {
        self.labels[row]
    }

    #[inline]
    pub fn score(&self, model: usize, row: usize) -> f64 {
        self.scores[model][row]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn scores(&self, model: usize) -> &[f64] {
        &self.scores[model]
    }
}

pub fn encode(
    dataset: &RawDataset,
    predictions: Vec<PredictionSet>,
    schema: &FeatureSchema,
) -> Result<EncodedDataset, IngestError> {
    if schema.n_features() != dataset.n_features() {
        return Err(IngestError::SchemaMismatch {
            schema: schema.n_features(),
            dataset: dataset.n_features(),
        });
    }
    let n_rows = dataset.n_rows();
    for p in &predictions {
        if p.scores.len() != n_rows {
            return Err(IngestError::RowCountMismatch {
                model: p.model_id.clone(),
                expected: n_rows,
                got: p.scores.len(),
            });
        }
    }
    let n_features = dataset.n_features();
    let mut codes = vec![MISSING; n_rows * n_features];
    for (f, (spec, column)) in schema.features.iter().zip(&dataset.columns).enumerate() {
        match (&spec.domain, column) {
            (FeatureDomain::Categorical { values, other }, RawColumn::Categorical(raw)) => {
                let lookup: HashMap<&str, u32> =
                    values.iter().enumerate().map(|(i, v)| (v.as_str(), i as u32)).collect();
                let other_id = other.as_ref().map(|_| values.len() as u32);
                for (row, v) in raw.iter().enumerate() {
                    let Some(v) = v else { continue };
                    let id = match lookup.get(v.as_str()) {
                        Some(&id) => id,
                        None => other_id.ok_or_else(|| IngestError::UnknownCategory {
                            row,
                            feature: spec.name.clone(),
                            value: v.clone(),
                        })?,
                    };
                    codes[row * n_features + f] = id;
                }
            }
            (domain @ FeatureDomain::Numeric { .. }, RawColumn::Numeric(raw)) => {
                for (row, v) in raw.iter().enumerate() {
                    let Some(v) = *v else { continue };
                    if !v.is_finite() {
                        return Err(IngestError::Unencodable {
                            row,
                            feature: spec.name.clone(),
                            value: v.to_string(),
                        });
                    }
                    codes[row * n_features + f] = domain.bin_of(v).expect("numeric domain");
                }
            }
            _ => {
                return Err(IngestError::InvalidParameter(format!(
                    "feature `{}` kind differs between schema and dataset",
                    spec.name
                )))
            }
        }
    }
    EncodedDataset::from_parts(n_features, codes, dataset.labels.clone(), predictions)
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty()
}

fn parse_label(row: usize, s: &str) -> Result<bool, IngestError> {
    match s {
        "1" | "true" | "True" | "TRUE" => Ok(true),
        "0" | "false" | "False" | "FALSE" => Ok(false),
        _ => match s.parse::<f64>() {
            Ok(1.0) => Ok(true),
            Ok(0.0) => Ok(false),
            _ => Err(IngestError::BadLabel {
                row,
                value: s.to_string(),
            }),
        },
    }
}

/// Reads a delimited dataset with a header row. Every column except
/// `label_column` becomes a feature. Columns named in `declared` get that
/// kind; the rest are numeric when every non-empty value parses as a number
/// and categorical otherwise. Empty fields are missing.
pub fn read_dataset<R: Read>(
    reader: R,
    delimiter: u8,
    label_column: &str,
    declared: &HashMap<String, ColumnKind>,
) -> Result<RawDataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| IngestError::MissingLabelColumn(label_column.to_string()))?;
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&i| i != label_idx).collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); feature_idx.len()];
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        labels.push(parse_label(row, record.get(label_idx).unwrap_or(""))?);
        for (slot, &i) in raw.iter_mut().zip(&feature_idx) {
            slot.push(record.get(i).unwrap_or("").to_string());
        }
    }
    if labels.is_empty() {
        return Err(IngestError::EmptyDataset);
    }

    let mut names = Vec::with_capacity(feature_idx.len());
    let mut columns = Vec::with_capacity(feature_idx.len());
    for (values, &i) in raw.into_iter().zip(&feature_idx) {
        let name = header[i].clone();
        let kind = match declared.get(&name) {
            Some(&k) => k,
            None if values
                .iter()
                .filter(|v| !is_missing_token(v))
                .all(|v| v.parse::<f64>().is_ok()) =>
            {
                ColumnKind::Numeric
            }
            None => ColumnKind::Categorical,
        };
        let column = match kind {
            ColumnKind::Categorical => RawColumn::Categorical(
                values
                    .into_iter()
                    .map(|v| (!is_missing_token(&v)).then_some(v))
                    .collect(),
            ),
            ColumnKind::Numeric => RawColumn::Numeric(
                values
                    .into_iter()
                    .map(|v| {
                        if is_missing_token(&v) {
                            Ok(None)
                        } else {
                            v.parse::<f64>()
                                .map(Some)
                                .map_err(|_| IngestError::NotNumeric(name.clone(), v))
                        }
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        names.push(name);
        columns.push(column);
    }
    RawDataset::new(names, columns, labels)
}

pub fn load_dataset(
    path: &Path,
    delimiter: u8,
    label_column: &str,
    declared: &HashMap<String, ColumnKind>,
) -> Result<RawDataset, IngestError> {
    read_dataset(File::open(path)?, delimiter, label_column, declared)
}

/// Reads `row_index, score` records. Every row index in `0..n_rows` must
/// appear exactly once.
pub fn read_predictions<R: Read>(
    reader: R,
    delimiter: u8,
    model_id: &str,
    n_rows: usize,
) -> Result<PredictionSet, IngestError> {
    let bad = |reason: String| IngestError::BadPrediction {
        model: model_id.to_string(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let idx_col = header
        .iter()
        .position(|h| h == "row_index")
        .ok_or_else(|| bad("missing `row_index` column".into()))?;
    let score_col = header
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| bad("missing `score` column".into()))?;

    let mut scores: Vec<Option<f64>> = vec![None; n_rows];
    let mut seen = 0usize;
    for record in rdr.records() {
        let record = record?;
        seen += 1;
        let idx_s = record.get(idx_col).unwrap_or("");
        let row: usize = idx_s
            .parse()
            .map_err(|_| bad(format!("bad row_index `{idx_s}`")))?;
        let score_s = record.get(score_col).unwrap_or("");
        let score: f64 = score_s
            .parse()
            .map_err(|_| bad(format!("row {row}: bad score `{score_s}`")))?;
        if row >= n_rows {
            return Err(IngestError::RowCountMismatch {
                model: model_id.to_string(),
                expected: n_rows,
                got: row + 1,
            });
        }
        if scores[row].replace(score).is_some() {
            return Err(bad(format!("duplicate row_index {row}")));
        }
    }
    if seen != n_rows {
        return Err(IngestError::RowCountMismatch {
            model: model_id.to_string(),
            expected: n_rows,
            got: seen,
        });
    }
    let scores = scores.into_iter().map(|s| s.expect("all rows seen")).collect();
    PredictionSet::new(model_id, scores)
}

pub fn load_predictions(
    path: &Path,
    delimiter: u8,
    model_id: &str,
    n_rows: usize,
) -> Result<PredictionSet, IngestError> {
    read_predictions(File::open(path)?, delimiter, model_id, n_rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(pairs: &[(&str, usize)]) -> HashMap<String, usize> {
        pairs.iter().map(|(v, c)| (v.to_string(), *c)).collect()
    }

    fn numeric_dataset(values: Vec<Option<f64>>) -> RawDataset {
        let n = values.len();
        RawDataset::new(vec!["x".into()], vec![RawColumn::Numeric(values)], vec![true; n]).unwrap()
    }

    #[test]
    fn top_j_frequency_order() {
        let t = top_j_categories(&counts(&[("a", 5), ("b", 3), ("c", 1), ("d", 1)]), 2);
        assert_eq!(t.retained, vec!["a", "b"]);
        assert_eq!(t.other, Some(vec!["c".to_string(), "d".to_string()]));
    }

    #[test]
    fn top_j_fewer_values_than_j() {
        let t = top_j_categories(&counts(&[("x", 10)]), 100);
        assert_eq!(t.retained, vec!["x"]);
        assert_eq!(t.other, None);
    }

    #[test]
    fn top_j_ties_lexicographic() {
        let t = top_j_categories(&counts(&[("b", 2), ("a", 2), ("c", 1)]), 1);
        assert_eq!(t.retained, vec!["a"]);
        assert_eq!(t.other, Some(vec!["b".to_string(), "c".to_string()]));
    }

    #[test]
    fn top_j_150_values() {
        let c: HashMap<String, usize> = (0..150).map(|i| (format!("v{i:03}"), 1000 - i)).collect();
        let t = top_j_categories(&c, 100);
        assert_eq!(t.retained.len(), 100);
        assert_eq!(t.other.unwrap().len(), 50);
    }

    #[test]
    fn uniform_deciles() {
        let ds = numeric_dataset((1..=100).map(|v| Some(v as f64)).collect());
        let schema = infer_schema(&ds, 100, 10).unwrap();
        let domain = &schema.features[0].domain;
        assert_eq!(domain.size(), 10);
        let enc = encode(&ds, vec![], &schema).unwrap();
        let mut pop = [0usize; 10];
        for r in 0..enc.n_rows() {
            pop[enc.row(r)[0] as usize] += 1;
        }
        assert_eq!(pop, [10; 10]);
    }

    #[test]
    fn constant_column_collapses_to_one_bin() {
        let ds = numeric_dataset(vec![Some(7.0); 50]);
        let schema = infer_schema(&ds, 100, 10).unwrap();
        assert_eq!(
            schema.features[0].domain,
            FeatureDomain::Numeric {
                lower_edges: vec![7.0],
                max: 7.0
            }
        );
    }

    #[test]
    fn bin_boundaries_half_open_and_closed_max() {
        let ds = numeric_dataset((0..20).map(|v| Some(v as f64)).collect());
        let schema = infer_schema(&ds, 100, 4).unwrap();
        let d = &schema.features[0].domain;
        // edges 0, 5, 10, 15
        assert_eq!(d.bin_of(5.0), Some(1));
        assert_eq!(d.bin_of(4.999), Some(0));
        assert_eq!(d.bin_of(19.0), Some(3));
        assert_eq!(d.bin_range(3), Some((15.0, 19.0, true)));
        assert_eq!(d.bin_range(1), Some((5.0, 10.0, false)));
    }

    #[test]
    fn empty_feature_is_named() {
        let ds = numeric_dataset(vec![None, None]);
        match infer_schema(&ds, 10, 10) {
            Err(IngestError::EmptyFeature(name)) => assert_eq!(name, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_unencodable_with_row() {
        let ds = numeric_dataset(vec![Some(1.0), Some(f64::NAN), Some(2.0)]);
        let schema = infer_schema(&ds, 10, 10).unwrap();
        match encode(&ds, vec![], &schema) {
            Err(IngestError::Unencodable { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_and_missing_encoding() {
        let col = RawColumn::Categorical(
            ["a", "a", "b", "c", ""]
                .iter()
                .map(|s| (!s.is_empty()).then(|| s.to_string()))
                .collect(),
        );
        let ds = RawDataset::new(vec!["f".into()], vec![col], vec![true; 5]).unwrap();
        let schema = infer_schema(&ds, 1, 10).unwrap();
        let enc = encode(&ds, vec![], &schema).unwrap();
        let ids: Vec<u32> = (0..5).map(|r| enc.row(r)[0]).collect();
        assert_eq!(ids, vec![0, 0, 1, 1, MISSING]);
        assert_eq!(schema.features[0].domain.other_id(), Some(1));
    }

    #[test]
    fn prediction_row_mismatch_is_fatal() {
        let ds = numeric_dataset(vec![Some(1.0), Some(2.0)]);
        let schema = infer_schema(&ds, 10, 10).unwrap();
        let p = PredictionSet::new("m", vec![0.5]).unwrap();
        assert!(matches!(
            encode(&ds, vec![p], &schema),
            Err(IngestError::RowCountMismatch { .. })
        ));
    }

    #[test]
    fn csv_round() {
        let text = "age,color,label\n1,red,1\n2,,0\n3,blue,1\n";
        let ds = read_dataset(text.as_bytes(), b',', "label", &HashMap::new()).unwrap();
        assert_eq!(ds.feature_names, vec!["age", "color"]);
        assert_eq!(ds.columns[0].kind(), ColumnKind::Numeric);
        assert_eq!(
            ds.columns[1],
            RawColumn::Categorical(vec![Some("red".into()), None, Some("blue".into())])
        );
        assert_eq!(ds.labels, vec![true, false, true]);

        let mut declared = HashMap::new();
        declared.insert("age".to_string(), ColumnKind::Categorical);
        let ds = read_dataset(text.as_bytes(), b',', "label", &declared).unwrap();
        assert_eq!(ds.columns[0].kind(), ColumnKind::Categorical);
    }

    #[test]
    fn csv_bad_label() {
        let text = "x,label\n1,2\n";
        assert!(matches!(
            read_dataset(text.as_bytes(), b',', "label", &HashMap::new()),
            Err(IngestError::BadLabel { row: 0, .. })
        ));
    }

    #[test]
    fn predictions_require_every_row_once() {
        let ok = "row_index,score\n1,0.2\n0,0.9\n";
        let p = read_predictions(ok.as_bytes(), b',', "m", 2).unwrap();
        assert_eq!(p.scores, vec![0.9, 0.2]);
        let short = "row_index,score\n0,0.9\n";
        assert!(matches!(
            read_predictions(short.as_bytes(), b',', "m", 2),
            Err(IngestError::RowCountMismatch { .. })
        ));
        let dup = "row_index,score\n0,0.9\n0,0.1\n";
        assert!(read_predictions(dup.as_bytes(), b',', "m", 2).is_err());
        let range = "row_index,score\n0,1.5\n1,0.1\n";
        assert!(read_predictions(range.as_bytes(), b',', "m", 2).is_err());
    }

    proptest! {
        #[test]
        fn bins_partition_non_missing(values in prop::collection::vec(prop::option::weighted(0.9, -50i32..50), 1..300),
                                      num_bins in 1usize..15) {
            prop_assume!(values.iter().any(Option::is_some));
            let ds = numeric_dataset(values.iter().map(|v| v.map(f64::from)).collect());
            let schema = infer_schema(&ds, 10, num_bins).unwrap();
            let again = infer_schema(&ds, 10, num_bins).unwrap();
            prop_assert_eq!(&schema, &again);
            let domain = &schema.features[0].domain;
            let n_bins = domain.size();
            prop_assert!(n_bins <= num_bins);
            if let FeatureDomain::Numeric { lower_edges, .. } = domain {
                prop_assert!(lower_edges.windows(2).all(|w| w[0] < w[1]));
            }
            let enc = encode(&ds, vec![], &schema).unwrap();
            let mut pop = vec![0usize; n_bins];
            for r in 0..enc.n_rows() {
                let id = enc.row(r)[0];
                if id != MISSING {
                    pop[id as usize] += 1;
                }
            }
            let non_missing = values.iter().filter(|v| v.is_some()).count();
            prop_assert_eq!(pop.iter().sum::<usize>(), non_missing);

            // Each bin is within one duplicated-value run of n / num_bins.
            let mut sorted: Vec<i32> = values.iter().flatten().copied().collect();
            sorted.sort();
            let longest_run = sorted.chunk_by(|a, b| a == b).map(<[i32]>::len).max().unwrap();
            let target = non_missing as f64 / num_bins as f64;
            for &p in &pop {
                prop_assert!((p as f64 - target).abs() <= longest_run as f64 + 1.0, "pop {:?} target {} run {}", pop, target, longest_run);
            }
        }

        #[test]
        fn exact_deciles_when_distinct(k in 1usize..30, num_bins in 1usize..12) {
            let n = k * num_bins;
            let ds = numeric_dataset((0..n).rev().map(|v| Some(v as f64 + 0.5)).collect());
            let schema = infer_schema(&ds, 10, num_bins).unwrap();
            let enc = encode(&ds, vec![], &schema).unwrap();
            let mut pop = vec![0usize; schema.features[0].domain.size()];
            for r in 0..n {
                pop[enc.row(r)[0] as usize] += 1;
            }
            prop_assert_eq!(pop, vec![k; num_bins]);
        }
    }
}
