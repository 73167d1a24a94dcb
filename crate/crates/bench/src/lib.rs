//! Fixtures shared by the criterion benchmarks in `benches/`.

use mdaux::hierarchy::{synthesize, ModelState, ParentSpec};
use mdaux::{MDPrior, SimplexVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `j` parents over `k` categories with distinct, deterministic means.
pub fn parents(j: usize, k: usize) -> Vec<ParentSpec> {
    (0..j)
        .map(|p| {
            let w: Vec<f64> = (0..k).map(|c| 1.0 + ((c + 3 * p) % k) as f64).collect();
            ParentSpec::new(SimplexVector::from_weights(&w).unwrap(), 2.0 * k as f64, vec![1.0; k], 1.0, 1.0).unwrap()
        })
        .collect()
}

/// A fresh model over synthetic data, fit with flat priors.
pub fn model(j: usize, k: usize, groups: usize, n: usize, seed: u64) -> ModelState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, _) = synthesize(&parents(j, k), groups, n, &mut rng).unwrap();
    let fit = (0..j).map(|_| ParentSpec::default_prior(k)).collect();
    ModelState::new(fit, data).unwrap()
}

pub fn prior(j: usize, k: usize) -> MDPrior {
    let rows: Vec<Vec<f64>> = parents(j, k).iter().map(ParentSpec::alpha).collect();
    MDPrior::from_rows(&rows).unwrap()
}
