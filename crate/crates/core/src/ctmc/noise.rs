use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric noise schedule on the unit time interval:
/// `sigma(t) = sigma_min^(1-t) * sigma_max^t`, with cumulative noise
/// `sigma_bar(t) = (sigma(t) - sigma_min) / ln(sigma_max / sigma_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    sigma_min: f64,
    sigma_max: f64,
}

impl NoiseSchedule {
    pub fn geometric(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min.is_finite() && sigma_max.is_finite() && sigma_max > sigma_min) {
            return Err(Error::config(format!(
                "geometric noise needs 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}"
            )));
        }
        Ok(NoiseSchedule { sigma_min, sigma_max })
    }

    /// The binomial-toy setting: sigma_min = 0.01, sigma_max = 5.
    pub fn toy_default() -> Self {
        NoiseSchedule { sigma_min: 0.01, sigma_max: 5.0 }
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    fn log_ratio(&self) -> f64 {
        (self.sigma_max / self.sigma_min).ln()
    }

    /// Instantaneous rate multiplier.
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma_min.powf(1.0 - t) * self.sigma_max.powf(t)
    }

    /// Time integral of `sigma` from 0 to `t`.
    pub fn sigma_bar(&self, t: f64) -> f64 {
        // sigma(t) - sigma_min computed as sigma_min * expm1(t * L) to keep
        // precision near t = 0.
        let l = self.log_ratio();
        self.sigma_min * (t * l).exp_m1() / l
    }

    /// `sigma_bar(from) - sigma_bar(to)`.
    pub fn sigma_bar_increment(&self, from: f64, to: f64) -> f64 {
        self.sigma_bar(from) - self.sigma_bar(to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseSchedule::geometric(0.0, 1.0).is_err());
        assert!(NoiseSchedule::geometric(1.0, 0.5).is_err());
        assert!(NoiseSchedule::geometric(0.01, f64::INFINITY).is_err());
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let n = NoiseSchedule::toy_default();
        assert_eq!(n.sigma_bar(0.0), 0.0);
        assert!((n.sigma(0.0) - 0.01).abs() < 1e-15);
        assert!((n.sigma(1.0) - 5.0).abs() < 1e-12);
        // Simpson's rule on sigma over [0, t].
        for &t in &[0.1, 0.5, 0.9, 1.0] {
            let m = 2000;
            let h = t / m as f64;
            let mut s = n.sigma(0.0) + n.sigma(t);
            for i in 1..m {
                s += n.sigma(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let quad = s * h / 3.0;
            assert!((quad - n.sigma_bar(t)).abs() < 1e-10, "t={t}: {quad} vs {}", n.sigma_bar(t));
        }
    }

    #[test]
    fn sigma_bar_strictly_increasing() {
        let n = NoiseSchedule::toy_default();
        let mut prev = n.sigma_bar(0.0);
        for i in 1..=1000 {
            let v = n.sigma_bar(i as f64 / 1000.0);
            assert!(v > prev);
            prev = v;
        }
    }
}
