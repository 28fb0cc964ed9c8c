//! Shared fixtures for the criterion benchmarks.

use sksd::models::{Gaussian, GaussianLocation};
use sksd::{ModelFamily, SampleBatch};

/// `n` standard normal draws in one dimension.
pub fn gaussian_sample(n: usize, seed: u64) -> SampleBatch {
    Gaussian.sample(&[0.0, 1.0], n, seed).expect("valid Gaussian parameters")
}

/// `n` draws from `N(0, I_d)` with the matching location family.
pub fn location_fixture(d: usize, n: usize, seed: u64) -> (GaussianLocation, SampleBatch) {
    let family = GaussianLocation::new(d).expect("positive dimension");
    let x = family.sample(&vec![0.0; d], n, seed).expect("valid location");
    (family, x)
}
