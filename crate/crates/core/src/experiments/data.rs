use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ctmc::Distribution;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Exact Binomial(n, p) pmf over `{0, ..., n}`.
pub fn binomial_pmf(n: usize, p: f64) -> Distribution {
    let mut probs = Vec::with_capacity(n + 1);
    let mut coef = 1.0f64;
    for k in 0..=n {
        probs.push(coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
        coef = coef * (n - k) as f64 / (k + 1) as f64;
    }
    Distribution::from_weights(probs).expect("binomial weights are valid")
}

/// Sequences where each token decrements its predecessor until 0, then
/// resets to a uniformly random value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountdownSpec {
    pub vocab: usize,
    pub length: usize,
}

impl CountdownSpec {
    pub const VOCAB: usize = 32;

    pub fn new(length: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::config("countdown sequences need length >= 2"));
        }
        Ok(CountdownSpec { vocab: Self::VOCAB, length })
    }

    pub fn generate_one(&self, rng: &mut Rng) -> Vec<usize> {
        let mut seq = Vec::with_capacity(self.length);
        let mut cur = rng.random_range(0..self.vocab);
        seq.push(cur);
        while seq.len() < self.length {
            cur = if cur == 0 { rng.random_range(0..self.vocab) } else { cur - 1 };
            seq.push(cur);
        }
        seq
    }
}

/// `n` countdown sequences; sequence `i` uses its own stream so the dataset
/// is independent of generation order.
pub fn gen_countdown(spec: &CountdownSpec, n: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..n).map(|i| spec.generate_one(&mut rng::stream(seed, rng::domain::DATASET, i as u64))).collect()
}

/// i.i.d. draws from a distribution, one stream per draw.
pub fn sample_distribution(p: &Distribution, n: usize, seed: u64) -> Vec<usize> {
    (0..n)
        .map(|i| p.sample_with(rng::stream(seed, rng::domain::DATASET, i as u64).random::<f64>()))
        .collect()
}
