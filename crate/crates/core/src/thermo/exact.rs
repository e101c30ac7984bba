//! Exact entropy production, activity and mobility on enumerable chains.
//!
//! All quantities are rates of the reverse process at noise time `t`: the
//! reverse marginal is the forward marginal `p = p_t`, and the reverse
//! generator is `Q̄(x, x') = σ(t) p(x') Q(x', x) / p(x)`, so the reverse flux
//! along an edge is `f(x → x') = σ(t) p(x') Q(x', x)` and never needs a
//! division by `p(x)`.

use rayon::prelude::*;

use crate::ctmc::{Distribution, NoiseSchedule, RateKernel, SequenceSpace, SINGULAR_FLOOR};
use crate::error::{Error, Result};

/// An entropy-production rate that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    /// Some edge carries flux in one direction only.
    Divergent,
}

impl Rate {
    /// `+inf` for divergent rates.
    pub fn value(self) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Divergent => f64::INFINITY,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Rate::Divergent)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(v) => Some(v),
            Rate::Divergent => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactRates {
    pub h_na: f64,
    pub h_ad: Rate,
    pub h_tot: Rate,
    pub activity: f64,
    pub mobility: f64,
}

/// Logarithmic mean of two fluxes; `a` when they are equal, 0 when either
/// vanishes.
pub fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let d = a.ln() - b.ln();
    if d.abs() < 1e-12 {
        // Second-order expansion around a = b.
        return b * (1.0 + d / 2.0 + d * d / 6.0);
    }
    (a - b) / d
}

/// Total off-diagonal flux of a generator under `p`.
pub fn activity_from_generator(gen: &ndarray::Array2<f64>, p: &[f64]) -> f64 {
    let n = p.len();
    (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y))).map(|(x, y)| p[x] * gen[[x, y]]).sum()
}

/// Sum over unordered pairs of the log-mean of the two directed fluxes.
pub fn mobility_from_generator(gen: &ndarray::Array2<f64>, p: &[f64]) -> f64 {
    let n = p.len();
    let mut m = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            m += log_mean(p[x] * gen[[x, y]], p[y] * gen[[y, x]]);
        }
    }
    m
}

/// Exact rates for marginal `p_t` of `space` at rate multiplier `sigma`.
pub fn exact_rates(space: &SequenceSpace, p_t: &Distribution, sigma: f64) -> Result<ExactRates> {
    if p_t.len() != space.size() {
        return Err(Error::InvalidDistribution(format!(
            "marginal has {} entries, space has {}",
            p_t.len(),
            space.size()
        )));
    }
    let kernel = space.kernel();
    let pi = kernel.stationary_distribution();
    let pi = pi.probs();
    let p = p_t.probs();
    let m = kernel.num_states();

    let mut h_na = 0.0;
    let mut h_ad = Some(0.0);
    let mut h_tot = Some(0.0);
    let mut activity = 0.0;
    let mut mobility = 0.0;

    for x in 0..space.size() {
        let seq = space.decode(x);
        for (i, &xi) in seq.iter().enumerate() {
            // Unmasking odds of this position, for the absorbing convention.
            let odds_mass = match kernel {
                RateKernel::Absorbing { vocab } if xi == vocab => {
                    (0..vocab).map(|y| p[space.substitute(x, i, y)]).sum::<f64>()
                }
                _ => 0.0,
            };
            for y in 0..m {
                if y == xi {
                    continue;
                }
                let x2 = space.substitute(x, i, y);
                let f = sigma * p[x2] * kernel.rate(y, xi);
                let b = sigma * p[x] * kernel.rate(xi, y);
                if x < x2 {
                    mobility += log_mean(f, b);
                }
                if f == 0.0 {
                    continue;
                }
                activity += f;
                h_tot = h_tot.and_then(|h| if b > 0.0 { Some(h + f * (f / b).ln()) } else { None });
                h_ad = h_ad.and_then(|h| {
                    let r = (kernel.rate(y, xi) * pi[y]) / (kernel.rate(xi, y) * pi[xi]);
                    if r.is_finite() && r > 0.0 {
                        Some(h + f * r.ln())
                    } else {
                        None
                    }
                });
                h_na += match kernel {
                    RateKernel::Uniform { .. } => {
                        if p[x] < SINGULAR_FLOOR {
                            return Err(Error::SingularState { state: x, mass: p[x], floor: SINGULAR_FLOOR });
                        }
                        f * (p[x2] * pi[xi] / (p[x] * pi[y])).ln()
                    }
                    RateKernel::Absorbing { .. } => f * (odds_mass / p[x2]).ln(),
                };
            }
        }
    }
    let wrap = |h: Option<f64>| h.map_or(Rate::Divergent, Rate::Finite);
    Ok(ExactRates { h_na, h_ad: wrap(h_ad), h_tot: wrap(h_tot), activity, mobility })
}

/// A data distribution on an enumerable space together with its noise
/// schedule; evaluates every exact quantity at any time.
#[derive(Debug, Clone)]
pub struct ExactChain {
    space: SequenceSpace,
    noise: NoiseSchedule,
    p0: Distribution,
}

impl ExactChain {
    pub fn new(space: SequenceSpace, noise: NoiseSchedule, p0: Distribution) -> Result<Self> {
        if p0.len() != space.size() {
            return Err(Error::InvalidDistribution(format!(
                "data distribution has {} entries, space has {}",
                p0.len(),
                space.size()
            )));
        }
        Ok(ExactChain { space, noise, p0 })
    }

    /// Single-token chain; `data` is padded with zero mass on the mask.
    pub fn single(kernel: RateKernel, noise: NoiseSchedule, data: &Distribution) -> Result<Self> {
        ExactChain::new(SequenceSpace::new(kernel, 1)?, noise, data.padded(kernel.num_states())?)
    }

    pub fn space(&self) -> SequenceSpace {
        self.space
    }

    pub fn kernel(&self) -> RateKernel {
        self.space.kernel()
    }

    pub fn noise(&self) -> NoiseSchedule {
        self.noise
    }

    pub fn data(&self) -> &Distribution {
        &self.p0
    }

    /// Forward marginal at noise time `t` (the reverse marginal at that time).
    pub fn marginal(&self, t: f64) -> Result<Distribution> {
        self.space.evolve(&self.p0, self.noise.sigma_bar(t))
    }

    pub fn rates(&self, t: f64) -> Result<ExactRates> {
        exact_rates(&self.space, &self.marginal(t)?, self.noise.sigma(t))
    }

    /// Rates at every grid time, computed in parallel.
    pub fn rates_on(&self, grid: &[f64]) -> Result<Vec<ExactRates>> {
        grid.par_iter().map(|&t| self.rates(t)).collect()
    }
}

pub fn h_na_exact(chain: &ExactChain, t: f64) -> Result<f64> {
    Ok(chain.rates(t)?.h_na)
}

pub fn h_ad_exact(chain: &ExactChain, t: f64) -> Result<Rate> {
    Ok(chain.rates(t)?.h_ad)
}

pub fn h_tot_exact(chain: &ExactChain, t: f64) -> Result<Rate> {
    Ok(chain.rates(t)?.h_tot)
}

pub fn activity_exact(chain: &ExactChain, t: f64) -> Result<f64> {
    Ok(chain.rates(t)?.activity)
}

pub fn mobility_exact(chain: &ExactChain, t: f64) -> Result<f64> {
    Ok(chain.rates(t)?.mobility)
}
