use std::sync::{Arc, Mutex};

use super::{Ratios, ScoreModel};
use crate::ctmc::{Distribution, NoiseSchedule, RateKernel, SequenceSpace, SINGULAR_FLOOR};
use crate::error::{Error, Result};

/// Exact ratios `p_t(y) / p_t(x)` for every state `y` of a single-token marginal.
pub fn oracle_ratios(p_t: &Distribution, x: usize) -> Result<Vec<f64>> {
    let p = p_t.probs();
    if x >= p.len() {
        return Err(Error::StateOutOfRange { state: x, num_states: p.len() });
    }
    if p[x] < SINGULAR_FLOOR {
        return Err(Error::SingularState { state: x, mass: p[x], floor: SINGULAR_FLOOR });
    }
    Ok(p.iter().map(|&q| q / p[x]).collect())
}

/// Exact score of an enumerable chain, computed from the forward marginal of
/// a known data distribution.
pub struct OracleScore {
    space: SequenceSpace,
    noise: NoiseSchedule,
    p0: Distribution,
    // Last evaluated (t, p_t); the sampler and estimators query many
    // sequences at the same t.
    cache: Mutex<Option<(u64, Arc<Distribution>)>>,
}

impl OracleScore {
    /// Joint oracle over sequences; `p0` is indexed by `space`.
    pub fn new(space: SequenceSpace, noise: NoiseSchedule, p0: Distribution) -> Result<Self> {
        if p0.len() != space.size() {
            return Err(Error::InvalidDistribution(format!(
                "data distribution has {} entries, space has {}",
                p0.len(),
                space.size()
            )));
        }
        Ok(OracleScore { space, noise, p0, cache: Mutex::new(None) })
    }

    /// Single-token oracle. `data` may cover only the data tokens; it is
    /// padded with zero mass on the mask state.
    pub fn single(kernel: RateKernel, noise: NoiseSchedule, data: &Distribution) -> Result<Self> {
        let p0 = data.padded(kernel.num_states())?;
        OracleScore::new(SequenceSpace::new(kernel, 1)?, noise, p0)
    }

    pub fn space(&self) -> SequenceSpace {
        self.space
    }

    pub fn noise(&self) -> NoiseSchedule {
        self.noise
    }

    pub fn data(&self) -> &Distribution {
        &self.p0
    }

    /// Forward marginal at time `t`.
    pub fn marginal(&self, t: f64) -> Result<Arc<Distribution>> {
        let key = t.to_bits();
        if let Some((k, p)) = self.cache.lock().expect("oracle cache poisoned").as_ref() {
            if *k == key {
                return Ok(Arc::clone(p));
            }
        }
        let p = Arc::new(self.space.evolve(&self.p0, self.noise.sigma_bar(t))?);
        *self.cache.lock().expect("oracle cache poisoned") = Some((key, Arc::clone(&p)));
        Ok(p)
    }
}

impl ScoreModel for OracleScore {
    fn kernel(&self) -> RateKernel {
        self.space.kernel()
    }

    fn score_at(&self, x: &[usize], positions: &[usize], t: f64) -> Result<Ratios> {
        let p_t = self.marginal(t)?;
        self.ratios_under(&p_t, x, positions)
    }

    fn score_many(&self, xs: &[&[usize]], positions: &[Vec<usize>], t: f64) -> Result<Vec<Ratios>> {
        let p_t = self.marginal(t)?;
        xs.iter().zip(positions).map(|(x, p)| self.ratios_under(&p_t, x, p)).collect()
    }
}

impl OracleScore {
    fn ratios_under(&self, p_t: &Distribution, x: &[usize], positions: &[usize]) -> Result<Ratios> {
        let p = p_t.probs();
        let xi = self.space.encode(x)?;
        if p[xi] < SINGULAR_FLOOR {
            return Err(Error::SingularState { state: xi, mass: p[xi], floor: SINGULAR_FLOOR });
        }
        let m = self.space.kernel().num_states();
        positions
            .iter()
            .map(|&pos| {
                if pos >= x.len() {
                    return Err(Error::config(format!("position {pos} out of range")));
                }
                Ok((0..m).map(|y| p[self.space.substitute(xi, pos, y)] / p[xi]).collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::binomial_pmf;

    #[test]
    fn uniform_marginal_gives_unit_ratios() {
        let k = RateKernel::uniform(4).unwrap();
        let oracle = OracleScore::single(k, NoiseSchedule::toy_default(), &Distribution::uniform(4)).unwrap();
        for x in 0..4 {
            let s = oracle.score(&[x], 0.3).unwrap();
            assert!(s[0].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn binomial_ratios_at_zero_noise() {
        let p0 = binomial_pmf(14, 0.5);
        let k = RateKernel::uniform(15).unwrap();
        let oracle = OracleScore::single(k, NoiseSchedule::toy_default(), &p0).unwrap();
        let s = oracle.score(&[7], 0.0).unwrap();
        let c = |n: u64, r: u64| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        for y in 0..15 {
            assert_close!(s[0][y], c(14, y as u64) / c(14, 7), 1e-12);
        }
    }

    #[test]
    fn absorbing_mask_ratios_match_enumeration() {
        let p0 = binomial_pmf(4, 0.3);
        let k = RateKernel::absorbing(5).unwrap();
        let noise = NoiseSchedule::geometric(0.01, 20.0).unwrap();
        let oracle = OracleScore::single(k, noise, &p0).unwrap();
        let t = 0.999;
        let s = oracle.score(&[5], t).unwrap();
        let keep = (-noise.sigma_bar(t)).exp();
        for y in 0..5 {
            assert_close!(s[0][y], keep * p0.probs()[y] / (1.0 - keep), 1e-12);
        }
        assert_eq!(s[0][5], 1.0);
    }

    #[test]
    fn ratios_are_antisymmetric() {
        let k = RateKernel::uniform(3).unwrap();
        let space = SequenceSpace::new(k, 2).unwrap();
        let p0 = Distribution::from_weights((0..9).map(|i| 1.0 + i as f64).collect()).unwrap();
        let oracle = OracleScore::new(space, NoiseSchedule::toy_default(), p0).unwrap();
        for xi in 0..9 {
            let x = space.decode(xi);
            let sx = oracle.score(&x, 0.4).unwrap();
            for pos in 0..2 {
                for y in 0..3 {
                    let mut z = x.clone();
                    z[pos] = y;
                    let sz = oracle.score(&z, 0.4).unwrap();
                    assert_close!(sx[pos][y] * sz[pos][x[pos]], 1.0, 1e-10);
                }
            }
        }
    }

    #[test]
    fn singular_state_is_reported() {
        let k = RateKernel::absorbing(2).unwrap();
        let p0 = Distribution::new(vec![1.0, 0.0]).unwrap();
        let oracle = OracleScore::single(k, NoiseSchedule::toy_default(), &p0).unwrap();
        assert!(matches!(oracle.score(&[1], 0.5), Err(Error::SingularState { .. })));
    }
}
