//! Seeded synthetic datasets with planted underperforming slices.
//!
//! Labels are fair coin flips. A model is "correct" on an example with
//! probability equal to the accuracy of the first planted slice the example
//! falls in, or the base accuracy otherwise. Correct examples score on the
//! label's side of 0.5, wrong ones on the other side, so accuracy at
//! threshold 0.5 is the planted accuracy.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Predicate, SingletonPredicate};
use crate::schema::{
    encode, infer_schema, EncodedDataset, FeatureDomain, FeatureSchema, IngestError, PredictionSet, RawColumn,
    RawDataset,
};

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureGen {
    /// Values `v0..v{cardinality-1}`, uniform or Zipf-distributed with the
    /// given exponent.
    Categorical {
        name: String,
        cardinality: usize,
        zipf_exponent: Option<f64>,
    },
    /// Uniform on `[low, high)`.
    Numeric { name: String, low: f64, high: f64 },
}

impl FeatureGen {
    pub fn name(&self) -> &str {
        match self {
            FeatureGen::Categorical { name, .. } | FeatureGen::Numeric { name, .. } => name,
        }
    }
}

/// Conjunction of `(feature index, category index)` conditions with its own
/// accuracy. Only categorical features can be conditioned on.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSlice {
    pub conditions: Vec<(usize, usize)>,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub features: Vec<FeatureGen>,
    pub base_accuracy: f64,
    pub planted: Vec<PlantedSlice>,
    /// Adds a second model with this accuracy everywhere.
    pub baseline_accuracy: Option<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `n_features` uniform categorical features named `f0, f1, ...`.
    pub fn uniform(rows: usize, n_features: usize, cardinality: usize, seed: u64) -> Self {
        Self {
            rows,
            features: (0..n_features)
                .map(|i| FeatureGen::Categorical {
                    name: format!("f{i}"),
                    cardinality,
                    zipf_exponent: None,
                })
                .collect(),
            base_accuracy: 0.8,
            planted: Vec::new(),
            baseline_accuracy: None,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub raw: RawDataset,
    pub predictions: PredictionSet,
    pub baseline: Option<PredictionSet>,
    pub planted: Vec<PlantedSlice>,
}

pub fn category_name(index: usize) -> String {
    format!("v{index}")
}

fn score_for(label: bool, correct: bool, u: f64) -> f64 {
    // [0.5, 1) predicts positive, [0, 0.5) negative.
    if label == correct {
        0.5 + 0.5 * u
    } else {
        0.5 * u
    }
}

pub fn generate(spec: &SyntheticSpec) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cat_codes: Vec<Option<Vec<usize>>> = Vec::with_capacity(spec.features.len());
    let mut columns = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        match f {
            FeatureGen::Categorical {
                cardinality,
                zipf_exponent,
                ..
            } => {
                assert!(*cardinality >= 1, "cardinality must be >= 1");
                let weights: Vec<f64> = (1..=*cardinality)
                    .map(|k| zipf_exponent.map_or(1.0, |s| (k as f64).powf(-s)))
                    .collect();
                let dist = WeightedIndex::new(&weights).expect("positive weights");
                let codes: Vec<usize> = (0..spec.rows).map(|_| dist.sample(&mut rng)).collect();
                columns.push(RawColumn::Categorical(
                    codes.iter().map(|&c| Some(category_name(c))).collect(),
                ));
                cat_codes.push(Some(codes));
            }
            FeatureGen::Numeric { low, high, .. } => {
                columns.push(RawColumn::Numeric(
                    (0..spec.rows).map(|_| Some(rng.random_range(*low..*high))).collect(),
                ));
                cat_codes.push(None);
            }
        }
    }

    let labels: Vec<bool> = (0..spec.rows).map(|_| rng.random_bool(0.5)).collect();
    let accuracy_of = |row: usize| {
        spec.planted
            .iter()
            .find(|p| {
                p.conditions.iter().all(|&(f, v)| {
                    cat_codes[f].as_ref().expect("planted condition on a numeric feature")[row] == v
                })
            })
            .map_or(spec.base_accuracy, |p| p.accuracy)
    };
    let scores: Vec<f64> = (0..spec.rows)
        .map(|r| {
            let correct = rng.random_bool(accuracy_of(r));
            score_for(labels[r], correct, rng.random::<f64>())
        })
        .collect();
    let baseline = spec.baseline_accuracy.map(|acc| {
        let scores = (0..spec.rows)
            .map(|r| {
                let correct = rng.random_bool(acc);
                score_for(labels[r], correct, rng.random::<f64>())
            })
            .collect();
        PredictionSet::new("baseline", scores).expect("scores in [0, 1]")
    });

    let names = spec.features.iter().map(|f| f.name().to_string()).collect();
    Synthetic {
        raw: RawDataset::new(names, columns, labels).expect("consistent synthetic columns"),
        predictions: PredictionSet::new("model", scores).expect("scores in [0, 1]"),
        baseline,
        planted: spec.planted.clone(),
    }
}

impl Synthetic {
    /// Infers a schema keeping every category and encodes the data with the
    /// model (and baseline, if any) predictions.
    pub fn encode(&self, num_bins: usize) -> Result<(FeatureSchema, EncodedDataset), IngestError> {
        let top_j = self
            .raw
            .columns
            .iter()
            .map(|c| match c {
                RawColumn::Categorical(v) => v.len(),
                RawColumn::Numeric(_) => 1,
            })
            .max()
            .unwrap_or(1);
        let schema = infer_schema(&self.raw, top_j, num_bins)?;
        let mut preds = vec![self.predictions.clone()];
        preds.extend(self.baseline.clone());
        let encoded = encode(&self.raw, preds, &schema)?;
        Ok((schema, encoded))
    }

    /// Predicate of planted slice `index` under `schema`. `None` when one of
    /// its categories never occurred in the data.
    pub fn planted_predicate(&self, schema: &FeatureSchema, index: usize) -> Option<Predicate> {
        let singletons = self.planted[index].conditions.iter().map(|&(f, v)| {
            let FeatureDomain::Categorical { values, .. } = &schema.features[f].domain else {
                return None;
            };
            let name = category_name(v);
            let id = values.iter().position(|x| *x == name)?;
            Some(SingletonPredicate::new(f as u32, id as u32))
        });
        Predicate::from_singletons(singletons.collect::<Option<Vec<_>>>()?)
    }
}
