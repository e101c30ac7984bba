use super::{kernel::check_sigma_bar, Distribution, RateKernel, ENUMERATION_CAP};
use crate::error::{Error, Result};

/// Enumerable joint state space of `length` positions, each an independent
/// copy of `kernel`. States are indexed little-endian: position 0 is the
/// least significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSpace {
    kernel: RateKernel,
    length: usize,
    size: usize,
}

impl SequenceSpace {
    pub fn new(kernel: RateKernel, length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::config("sequence length must be positive"));
        }
        let m = kernel.num_states();
        let size = (0..length)
            .try_fold(1usize, |acc, _| acc.checked_mul(m).filter(|&s| s <= ENUMERATION_CAP))
            .ok_or(Error::Capacity { size: m.saturating_pow(length as u32), cap: ENUMERATION_CAP })?;
        Ok(SequenceSpace { kernel, length, size })
    }

    pub fn kernel(&self) -> RateKernel {
        self.kernel
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, seq: &[usize]) -> Result<usize> {
        if seq.len() != self.length {
            return Err(Error::config(format!("expected {} tokens, got {}", self.length, seq.len())));
        }
        let m = self.kernel.num_states();
        let mut idx = 0;
        for &tok in seq.iter().rev() {
            self.kernel.check_state(tok)?;
            idx = idx * m + tok;
        }
        Ok(idx)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let m = self.kernel.num_states();
        (0..self.length)
            .map(|_| {
                let t = idx % m;
                idx /= m;
                t
            })
            .collect()
    }

    /// Index of `state` with position `pos` replaced by `token`.
    pub fn substitute(&self, state: usize, pos: usize, token: usize) -> usize {
        let m = self.kernel.num_states();
        let stride = m.pow(pos as u32);
        let cur = (state / stride) % m;
        state - cur * stride + token * stride
    }

    pub fn token_at(&self, state: usize, pos: usize) -> usize {
        let m = self.kernel.num_states();
        (state / m.pow(pos as u32)) % m
    }

    /// Forward marginal of the factorized chain: each position evolves
    /// independently under `kernel`.
    pub fn evolve(&self, p0: &Distribution, sigma_bar: f64) -> Result<Distribution> {
        check_sigma_bar(sigma_bar)?;
        if p0.len() != self.size {
            return Err(Error::InvalidDistribution(format!(
                "joint distribution has {} entries, space has {}",
                p0.len(),
                self.size
            )));
        }
        let m = self.kernel.num_states();
        let op = self.kernel.transition_operator(sigma_bar)?;
        let mat = op.matrix();
        let mut cur = p0.probs().to_vec();
        let mut next = vec![0.0; self.size];
        for pos in 0..self.length {
            let stride = m.pow(pos as u32);
            for (x, out) in next.iter_mut().enumerate() {
                let b = (x / stride) % m;
                let base = x - b * stride;
                *out = (0..m).map(|a| cur[base + a * stride] * mat[[a, b]]).sum();
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Distribution::new(cur)
    }

    /// Lift a distribution over sequences of data tokens (no mask) into the
    /// joint space.
    pub fn lift(&self, weights: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Distribution> {
        let mut p = vec![0.0; self.size];
        for (seq, w) in weights {
            p[self.encode(&seq)?] += w;
        }
        Distribution::from_weights(p)
    }
}
