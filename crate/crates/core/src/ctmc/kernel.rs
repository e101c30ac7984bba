use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Distribution, TransitionOperator, ENUMERATION_CAP, SINGULAR_FLOOR};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Per-token infinitesimal generator family.
///
/// `Uniform { vocab }` jumps between all `vocab` tokens at unit rate.
/// `Absorbing { vocab }` has `vocab` data tokens plus a mask state at index
/// `vocab`; every data token jumps to the mask at unit rate and the mask row
/// is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum RateKernel {
    Uniform { vocab: usize },
    Absorbing { vocab: usize },
}

impl RateKernel {
    pub fn uniform(vocab: usize) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::config(format!("uniform kernel needs vocab >= 2, got {vocab}")));
        }
        Ok(RateKernel::Uniform { vocab })
    }

    pub fn absorbing(vocab: usize) -> Result<Self> {
        if vocab < 1 {
            return Err(Error::config("absorbing kernel needs at least one data token"));
        }
        Ok(RateKernel::Absorbing { vocab })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateKernel::Uniform { .. } => "uniform",
            RateKernel::Absorbing { .. } => "absorbing",
        }
    }

    /// Number of data tokens.
    pub fn vocab(&self) -> usize {
        match *self {
            RateKernel::Uniform { vocab } | RateKernel::Absorbing { vocab } => vocab,
        }
    }

    /// Size of the per-token state space (data tokens plus mask, if any).
    pub fn num_states(&self) -> usize {
        match *self {
            RateKernel::Uniform { vocab } => vocab,
            RateKernel::Absorbing { vocab } => vocab + 1,
        }
    }

    pub fn mask(&self) -> Option<usize> {
        match *self {
            RateKernel::Uniform { .. } => None,
            RateKernel::Absorbing { vocab } => Some(vocab),
        }
    }

    pub fn is_mask(&self, state: usize) -> bool {
        self.mask() == Some(state)
    }

    /// Whether the base generator satisfies detailed balance w.r.t. its
    /// stationary distribution.
    pub fn is_reversible(&self) -> bool {
        matches!(self, RateKernel::Uniform { .. })
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        let n = self.num_states();
        if state >= n {
            return Err(Error::StateOutOfRange { state, num_states: n });
        }
        Ok(())
    }

    /// Base generator entry `Q(from, to)`, including the diagonal.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        match *self {
            RateKernel::Uniform { vocab } => {
                if from == to {
                    -((vocab - 1) as f64)
                } else {
                    1.0
                }
            }
            RateKernel::Absorbing { vocab } => {
                if from == vocab {
                    0.0
                } else if to == vocab {
                    1.0
                } else if from == to {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Dense base generator.
    pub fn generator(&self) -> Array2<f64> {
        let n = self.num_states();
        Array2::from_shape_fn((n, n), |(a, b)| self.rate(a, b))
    }

    /// `p(x_t = to | x_s = from)` after cumulative noise `sigma_bar`.
    pub fn transition_probability(&self, sigma_bar: f64, from: usize, to: usize) -> Result<f64> {
        check_sigma_bar(sigma_bar)?;
        self.check_state(from)?;
        self.check_state(to)?;
        Ok(self.transition_unchecked(sigma_bar, from, to))
    }

    pub(crate) fn transition_unchecked(&self, sigma_bar: f64, from: usize, to: usize) -> f64 {
        match *self {
            RateKernel::Uniform { vocab } => {
                let n = vocab as f64;
                let decay = (-n * sigma_bar).exp();
                let delta = if from == to { 1.0 } else { 0.0 };
                1.0 / n + (delta - 1.0 / n) * decay
            }
            RateKernel::Absorbing { vocab } => {
                let keep = (-sigma_bar).exp();
                if from == vocab {
                    if to == vocab {
                        1.0
                    } else {
                        0.0
                    }
                } else if to == from {
                    keep
                } else if to == vocab {
                    -(-sigma_bar).exp_m1()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn transition_operator(&self, sigma_bar: f64) -> Result<TransitionOperator> {
        check_sigma_bar(sigma_bar)?;
        let n = self.num_states();
        let matrix = Array2::from_shape_fn((n, n), |(a, b)| self.transition_unchecked(sigma_bar, a, b));
        Ok(TransitionOperator::new(*self, sigma_bar, matrix))
    }

    /// Push `p0` through the forward process for cumulative noise `sigma_bar`.
    pub fn evolve_marginal(&self, p0: &Distribution, sigma_bar: f64) -> Result<Distribution> {
        check_sigma_bar(sigma_bar)?;
        let n = self.num_states();
        if p0.len() != n {
            return Err(Error::InvalidDistribution(format!(
                "distribution has {} entries, kernel has {n} states",
                p0.len()
            )));
        }
        if n > ENUMERATION_CAP {
            return Err(Error::Capacity { size: n, cap: ENUMERATION_CAP });
        }
        let p = p0.probs();
        let out = match *self {
            RateKernel::Uniform { vocab } => {
                let nf = vocab as f64;
                let decay = (-nf * sigma_bar).exp();
                p.iter().map(|&q| 1.0 / nf + (q - 1.0 / nf) * decay).collect()
            }
            RateKernel::Absorbing { vocab } => {
                let keep = (-sigma_bar).exp();
                let mut out: Vec<f64> = p.iter().map(|&q| q * keep).collect();
                let moved: f64 = p[..vocab].iter().sum::<f64>() * -(-sigma_bar).exp_m1();
                out[vocab] = p[vocab] + moved;
                out
            }
        };
        Distribution::new(out)
    }

    pub fn stationary_distribution(&self) -> Distribution {
        match *self {
            RateKernel::Uniform { vocab } => Distribution::uniform(vocab),
            RateKernel::Absorbing { vocab } => Distribution::point_mass(vocab + 1, vocab),
        }
    }

    /// Reverse-process rate `from -> to` under marginal `p_t` and the base
    /// generator: `p_t(to) / p_t(from) * Q(to, from)` off the diagonal, minus
    /// the off-diagonal row sum on it. Scale by `sigma(t)` for the
    /// time-dependent rate.
    pub fn reverse_rate(&self, p_t: &Distribution, from: usize, to: usize) -> Result<f64> {
        self.check_state(from)?;
        self.check_state(to)?;
        if p_t.len() != self.num_states() {
            return Err(Error::InvalidDistribution("marginal does not match kernel".into()));
        }
        let p = p_t.probs();
        if p[from] < SINGULAR_FLOOR {
            return Err(Error::SingularState { state: from, mass: p[from], floor: SINGULAR_FLOOR });
        }
        let off = |y: usize| p[y] / p[from] * self.rate(y, from);
        if from != to {
            Ok(off(to))
        } else {
            Ok(-(0..self.num_states()).filter(|&y| y != from).map(off).sum::<f64>())
        }
    }

    /// Draw `x_t` given `x_0 = token` after cumulative noise `sigma_bar`.
    pub fn sample_forward(&self, token: usize, sigma_bar: f64, rng: &mut Rng) -> usize {
        match *self {
            RateKernel::Uniform { vocab } => {
                let resample = -(-(vocab as f64) * sigma_bar).exp_m1();
                if rng.random::<f64>() < resample {
                    rng.random_range(0..vocab)
                } else {
                    token
                }
            }
            RateKernel::Absorbing { vocab } => {
                if token == vocab || rng.random::<f64>() < -(-sigma_bar).exp_m1() {
                    vocab
                } else {
                    token
                }
            }
        }
    }

    /// Draw a token from the stationary (prior) distribution.
    pub fn sample_prior(&self, rng: &mut Rng) -> usize {
        match *self {
            RateKernel::Uniform { vocab } => rng.random_range(0..vocab),
            RateKernel::Absorbing { vocab } => vocab,
        }
    }
}

pub(crate) fn check_sigma_bar(sigma_bar: f64) -> Result<()> {
    if !sigma_bar.is_finite() || sigma_bar < 0.0 {
        return Err(Error::domain(format!("cumulative noise must be finite and >= 0, got {sigma_bar}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_generators_have_zero_row_sums() {
        for k in [RateKernel::uniform(5).unwrap(), RateKernel::absorbing(4).unwrap()] {
            let q = k.generator();
            for row in q.rows() {
                assert_close!(row.sum(), 0.0, 1e-15);
            }
            for ((a, b), &v) in q.indexed_iter() {
                if a != b {
                    assert!(v >= 0.0);
                }
            }
        }
        let q = RateKernel::absorbing(3).unwrap().generator();
        assert!(q.row(3).iter().all(|&v| v == 0.0));
        assert_eq!(RateKernel::uniform(4).unwrap().rate(1, 1), -3.0);
    }

    #[test]
    fn transition_probability_examples() {
        let u = RateKernel::uniform(2).unwrap();
        assert_close!(u.transition_probability(2f64.ln() / 2.0, 0, 0).unwrap(), 0.75, 1e-15);
        let a = RateKernel::absorbing(2).unwrap();
        assert_close!(a.transition_probability(2f64.ln(), 0, 2).unwrap(), 0.5, 1e-15);
        for k in [u, a] {
            for x in 0..k.num_states() {
                assert_eq!(k.transition_probability(0.0, x, x).unwrap(), 1.0);
            }
        }
        assert_eq!(a.transition_probability(1.0, 2, 2).unwrap(), 1.0);
        assert_eq!(a.transition_probability(1.0, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn transition_probability_errors() {
        let u = RateKernel::uniform(3).unwrap();
        assert!(matches!(u.transition_probability(-0.1, 0, 0), Err(Error::Domain(_))));
        assert!(matches!(u.transition_probability(0.1, 3, 0), Err(Error::StateOutOfRange { .. })));
    }

    #[test]
    fn evolve_marginal_examples() {
        let u = RateKernel::uniform(2).unwrap();
        let p0 = Distribution::new(vec![1.0, 0.0]).unwrap();
        let p = u.evolve_marginal(&p0, 20.0).unwrap();
        assert_close!(p.probs()[0], 0.5, 1e-8);
        assert_close!(p.probs()[1], 0.5, 1e-8);
        assert_eq!(u.evolve_marginal(&p0, 0.0).unwrap(), p0);

        let a = RateKernel::absorbing(2).unwrap();
        let p0 = Distribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        let p = a.evolve_marginal(&p0, 2f64.ln()).unwrap();
        assert_close!(p.probs()[0], 0.5, 1e-15);
        assert_eq!(p.probs()[1], 0.0);
        assert_close!(p.probs()[2], 0.5, 1e-15);
    }

    #[test]
    fn evolve_marginal_rejects_oversized_support() {
        let u = RateKernel::uniform(5000).unwrap();
        let p0 = Distribution::uniform(5000);
        assert!(matches!(u.evolve_marginal(&p0, 0.1), Err(Error::Capacity { .. })));
    }

    #[test]
    fn reverse_rate_examples() {
        let u = RateKernel::uniform(2).unwrap();
        let p = Distribution::new(vec![0.75, 0.25]).unwrap();
        assert_close!(u.reverse_rate(&p, 0, 1).unwrap(), 1.0 / 3.0, 1e-15);
        assert_close!(u.reverse_rate(&p, 0, 0).unwrap(), -1.0 / 3.0, 1e-15);

        let a = RateKernel::absorbing(2).unwrap();
        let p = Distribution::new(vec![0.3, 0.2, 0.5]).unwrap();
        assert_eq!(a.reverse_rate(&p, 0, 2).unwrap(), 0.0);
        assert_close!(a.reverse_rate(&p, 2, 0).unwrap(), 0.6, 1e-15);

        let u4 = RateKernel::uniform(4).unwrap();
        let pi = Distribution::uniform(4);
        for x in 0..4 {
            for y in 0..4 {
                if x != y {
                    assert_close!(u4.reverse_rate(&pi, x, y).unwrap(), 1.0, 1e-15);
                }
            }
        }
    }

    #[test]
    fn reverse_rate_reports_singular_state() {
        let u = RateKernel::uniform(2).unwrap();
        let p = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(u.reverse_rate(&p, 1, 0), Err(Error::SingularState { state: 1, .. })));
    }

    #[test]
    fn stationary_distribution_is_invariant() {
        let u = RateKernel::uniform(4).unwrap();
        assert_eq!(u.stationary_distribution().probs(), &[0.25; 4]);
        let a = RateKernel::absorbing(2).unwrap();
        assert_eq!(a.stationary_distribution().probs(), &[0.0, 0.0, 1.0]);
        for k in [u, a, RateKernel::uniform(7).unwrap(), RateKernel::absorbing(5).unwrap()] {
            let pi = ndarray::Array1::from(k.stationary_distribution().probs().to_vec());
            let flux = pi.dot(&k.generator());
            assert!(flux.iter().all(|v| v.abs() < 1e-12));
        }
    }
}
