use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// A probability vector over an enumerable state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates nonnegativity and unit mass (within 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Distribution(probs))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Distribution::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Distribution(p)
    }

    /// Empirical distribution of `samples` over `n` states.
    pub fn empirical(samples: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut counts = vec![0.0; n];
        for s in samples {
            if s >= n {
                return Err(Error::StateOutOfRange { state: s, num_states: n });
            }
            counts[s] += 1.0;
        }
        Distribution::from_weights(counts)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Embed a distribution over data tokens into a larger state space
    /// (e.g. appending a zero-mass mask state).
    pub fn padded(&self, n: usize) -> Result<Self> {
        if n < self.len() {
            return Err(Error::InvalidDistribution(format!("cannot pad {} states to {n}", self.len())));
        }
        let mut p = self.0.clone();
        p.resize(n, 0.0);
        Ok(Distribution(p))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Inverse-CDF draw from a uniform variate `u` in [0, 1).
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave `acc` a hair under 1; fall back to the last
        // state with mass.
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.5 + 1e-10]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn empirical_and_sampling() {
        let d = Distribution::empirical([0, 1, 1, 3], 4).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.5, 0.0, 0.25]);
        assert_eq!(d.sample_with(0.0), 0);
        assert_eq!(d.sample_with(0.3), 1);
        assert_eq!(d.sample_with(0.76), 3);
        assert_eq!(d.sample_with(1.0), 3);
        assert!(Distribution::empirical([4], 4).is_err());
    }
}
