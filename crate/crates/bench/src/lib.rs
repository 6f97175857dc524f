//! Shared fixtures for the criterion benchmarks.

use hct_core::data::{generate_synthetic, Dataset, SyntheticSpec};
use hct_core::net::{init_network, NetworkSpec, ParameterVector};

/// The experiment-scale network: 9 inputs, hidden layers 64 and 32.
pub fn experiment_network() -> (NetworkSpec, ParameterVector) {
    let spec = NetworkSpec::new(9, vec![64, 32]);
    let params = init_network(&spec, 0);
    (spec, params)
}

pub fn experiment_dataset() -> Dataset {
    generate_synthetic(&SyntheticSpec::default(), 0).expect("default synthetic dataset")
}
