//! Shared fixtures for the benchmarks.

use slicefind_core::synth::{generate, PlantedSlice, SyntheticSpec};
use slicefind_core::{EncodedDataset, FeatureSchema};

/// Uniform categorical data with one planted low-accuracy cell.
pub fn fixture(rows: usize, features: usize, cardinality: usize, seed: u64) -> (FeatureSchema, EncodedDataset) {
    let mut spec = SyntheticSpec::uniform(rows, features, cardinality, seed);
    spec.planted = vec![PlantedSlice {
        conditions: vec![(0, 0), (1, 1)],
        accuracy: 0.4,
    }];
    generate(&spec).encode(10).expect("synthetic data encodes")
}
