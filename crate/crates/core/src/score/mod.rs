//! Probability-ratio ("score") models.
//!
//! A score model answers `s(x, t)_{i,y} ≈ p_t(x with x_i = y) / p_t(x)` for
//! every position `i` of a token sequence `x` and every per-token state `y`.
//! The reverse generator, the entropy estimators and the sampler only ever
//! see the model through [`ScoreModel`].

mod loss;
mod mlp;
mod oracle;
mod train;

pub use loss::{dwdse_loss, expected_dwdse_exact, DwdseLossValue, LossBatch, LossRow, TIME_FLOOR};
pub use mlp::{perturb, time_features, Dense, MlpArch, MlpParams, MlpScore, RowInputs};
pub use oracle::{oracle_ratios, OracleScore};
pub use train::{loss_and_grad, moving_average, train, TrainConfig, TrainReport};

use crate::ctmc::RateKernel;
use crate::error::Result;

/// Per-position ratio vectors, indexed `[position][state]`.
pub type Ratios = Vec<Vec<f64>>;

pub trait ScoreModel: Send + Sync {
    fn kernel(&self) -> RateKernel;

    /// Ratio vectors for the requested positions of `x` at time `t`, in the
    /// order given. The entry at the current token of each position is 1.
    fn score_at(&self, x: &[usize], positions: &[usize], t: f64) -> Result<Ratios>;

    /// Ratio vectors for every position.
    fn score(&self, x: &[usize], t: f64) -> Result<Ratios> {
        let all: Vec<usize> = (0..x.len()).collect();
        self.score_at(x, &all, t)
    }

    /// Ratios for several sequences at the same time; `positions[j]` lists
    /// the positions of `xs[j]`. Implementations may batch the work.
    fn score_many(&self, xs: &[&[usize]], positions: &[Vec<usize>], t: f64) -> Result<Vec<Ratios>> {
        xs.iter().zip(positions).map(|(x, p)| self.score_at(x, p, t)).collect()
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for &S {
    fn kernel(&self) -> RateKernel {
        (**self).kernel()
    }

    fn score_at(&self, x: &[usize], positions: &[usize], t: f64) -> Result<Ratios> {
        (**self).score_at(x, positions, t)
    }

    fn score_many(&self, xs: &[&[usize]], positions: &[Vec<usize>], t: f64) -> Result<Vec<Ratios>> {
        (**self).score_many(xs, positions, t)
    }
}

/// The trivial model `s ≡ 1`.
#[derive(Debug, Clone, Copy)]
pub struct UnitScore(pub RateKernel);

impl ScoreModel for UnitScore {
    fn kernel(&self) -> RateKernel {
        self.0
    }

    fn score_at(&self, _x: &[usize], positions: &[usize], _t: f64) -> Result<Ratios> {
        Ok(vec![vec![1.0; self.0.num_states()]; positions.len()])
    }
}

/// Positions whose reverse rates can be nonzero: every position for the
/// uniform kernel, only masked positions for the absorbing kernel.
pub fn active_positions(kernel: RateKernel, x: &[usize]) -> Vec<usize> {
    match kernel.mask() {
        None => (0..x.len()).collect(),
        Some(mask) => x.iter().enumerate().filter(|(_, &t)| t == mask).map(|(i, _)| i).collect(),
    }
}
