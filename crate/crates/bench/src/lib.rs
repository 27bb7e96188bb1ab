//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use clinsim_core::cohort::{builtin_spec, generate_cohort, CohortSpec, GenerateOptions};
use clinsim_core::CaseRecord;

pub fn cohort(n: usize, seed: u64) -> (CohortSpec, Vec<CaseRecord>) {
    let spec = builtin_spec();
    let cases = generate_cohort(&spec, n, seed, &GenerateOptions::default()).expect("builtin cohort");
    (spec, cases)
}

pub fn gaussian(n: usize, shift: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
}

pub fn gaussian_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}
