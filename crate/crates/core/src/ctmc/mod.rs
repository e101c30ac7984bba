//! Forward continuous-time Markov chains for discrete diffusion: rate
//! kernels, the geometric noise schedule, closed-form transition
//! probabilities, marginal evolution and the time-reversal relation.
//!
//! The time-dependent generator is `Q_t = sigma(t) * Q`, so every transition
//! quantity depends on time only through the cumulative noise
//! `sigma_bar(t)`.

mod distribution;
mod joint;
mod kernel;
mod noise;
mod transition;

use serde::{Deserialize, Serialize};

pub use distribution::Distribution;
pub use joint::SequenceSpace;
pub use kernel::RateKernel;
pub use noise::NoiseSchedule;
pub use transition::TransitionOperator;

use crate::error::{Error, Result};

/// Largest state space handled by dense enumeration.
pub const ENUMERATION_CAP: usize = 4096;

/// Masses below this are treated as singular in ratio denominators.
pub const SINGULAR_FLOOR: f64 = 1e-15;

/// Flat key-value description of a kernel and its noise schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub kernel: KernelKind,
    pub vocab: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Uniform,
    Absorbing,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(KernelKind::Uniform),
            "absorbing" => Ok(KernelKind::Absorbing),
            other => Err(Error::config(format!("unknown kernel {other:?}"))),
        }
    }
}

impl DiffusionConfig {
    pub fn new(kernel: RateKernel, noise: NoiseSchedule) -> Self {
        let kind = match kernel {
            RateKernel::Uniform { .. } => KernelKind::Uniform,
            RateKernel::Absorbing { .. } => KernelKind::Absorbing,
        };
        DiffusionConfig { kernel: kind, vocab: kernel.vocab(), sigma_min: noise.sigma_min(), sigma_max: noise.sigma_max() }
    }

    pub fn rate_kernel(&self) -> Result<RateKernel> {
        match self.kernel {
            KernelKind::Uniform => RateKernel::uniform(self.vocab),
            KernelKind::Absorbing => RateKernel::absorbing(self.vocab),
        }
    }

    pub fn noise(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::geometric(self.sigma_min, self.sigma_max)
    }

    pub fn build(&self) -> Result<(RateKernel, NoiseSchedule)> {
        Ok((self.rate_kernel()?, self.noise()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let cfg = DiffusionConfig::new(RateKernel::absorbing(32).unwrap(), NoiseSchedule::toy_default());
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(json, r#"{"kernel":"absorbing","vocab":32,"sigma_min":0.01,"sigma_max":5.0}"#);
        let back: DiffusionConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let (k, n) = back.build().unwrap();
        assert_eq!(k.num_states(), 33);
        assert_eq!(n.sigma_max(), 5.0);
    }
}
