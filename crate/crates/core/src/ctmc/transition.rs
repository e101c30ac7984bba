use ndarray::Array2;

use super::{Distribution, RateKernel};
use crate::error::{Error, Result};

/// Dense conditional matrix `p(x_t = b | x_s = a)` for a fixed cumulative
/// noise increment.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    kernel: RateKernel,
    sigma_bar: f64,
    matrix: Array2<f64>,
}

impl TransitionOperator {
    pub(crate) fn new(kernel: RateKernel, sigma_bar: f64, matrix: Array2<f64>) -> Self {
        TransitionOperator { kernel, sigma_bar, matrix }
    }

    pub fn kernel(&self) -> RateKernel {
        self.kernel
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Apply `self` then `other`; the result carries the summed noise.
    pub fn compose(&self, other: &TransitionOperator) -> Result<TransitionOperator> {
        if self.kernel != other.kernel {
            return Err(Error::config("cannot compose operators of different kernels"));
        }
        Ok(TransitionOperator {
            kernel: self.kernel,
            sigma_bar: self.sigma_bar + other.sigma_bar,
            matrix: self.matrix.dot(&other.matrix),
        })
    }

    /// Row-vector product `p * P`.
    pub fn apply(&self, p: &Distribution) -> Result<Distribution> {
        if p.len() != self.matrix.nrows() {
            return Err(Error::InvalidDistribution("distribution does not match operator".into()));
        }
        let v = ndarray::ArrayView1::from(p.probs()).dot(&self.matrix);
        Distribution::new(v.to_vec())
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_are_stochastic_and_compose() {
        for k in [RateKernel::uniform(6).unwrap(), RateKernel::absorbing(5).unwrap()] {
            let a = k.transition_operator(0.3).unwrap();
            let b = k.transition_operator(0.45).unwrap();
            assert!(a.max_row_sum_error() < 1e-12);
            assert!(a.matrix().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let ab = a.compose(&b).unwrap();
            let direct = k.transition_operator(0.75).unwrap();
            let err = (ab.matrix() - direct.matrix()).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v));
            assert!(err < 1e-12, "{err}");
            assert!((ab.sigma_bar() - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_matches_evolve_marginal() {
        let k = RateKernel::absorbing(3).unwrap();
        let p0 = Distribution::new(vec![0.2, 0.3, 0.4, 0.1]).unwrap();
        let via_op = k.transition_operator(0.7).unwrap().apply(&p0).unwrap();
        let direct = k.evolve_marginal(&p0, 0.7).unwrap();
        for (a, b) in via_op.probs().iter().zip(direct.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
