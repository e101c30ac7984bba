//! Denoising score-entropy objective.
//!
//! For a data sequence `x0`, a time `t ~ U[TIME_FLOOR, 1]` and a corrupted
//! `x_t`, every active position `i` and every state `y != x_t[i]` contribute
//!
//! ```text
//! w · [ s_y − r_y ln s_y + r_y (ln r_y − 1) ],   w = σ(t) Q(y, x_t[i])
//! ```
//!
//! where `r_y = p(y | x0[i]) / p(x_t[i] | x0[i])` is the exact conditional
//! ratio of the factorized forward kernel. Each term is a Bregman
//! divergence that vanishes at `s_y = r_y`; in expectation over `x0` the
//! minimizer is the marginal ratio `p_t(x with x_i = y) / p_t(x)`.

use rand::Rng as _;

use super::{active_positions, ScoreModel};
use crate::ctmc::{Distribution, NoiseSchedule, RateKernel};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Lower end of the time interval used for training and estimation.
pub const TIME_FLOOR: f64 = 1e-5;

/// One scored position of one corrupted sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    /// Index into [`LossBatch::items`].
    pub item: usize,
    pub pos: usize,
    /// Exact conditional ratios `r_y` (1 at the current token).
    pub target: Vec<f64>,
    /// `σ(t) Q(y, x_t[pos])`, 0 at the current token.
    pub weight: Vec<f64>,
}

/// A drawn Monte Carlo batch: corrupted sequences with their times, and the
/// rows that enter the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    pub items: Vec<(Vec<usize>, f64)>,
    pub rows: Vec<LossRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwdseLossValue {
    pub loss: f64,
    /// Loss of each batch item; `loss` is their mean.
    pub per_sample: Vec<f64>,
}

impl DwdseLossValue {
    fn from_samples(per_sample: Vec<f64>) -> Self {
        let loss = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        DwdseLossValue { loss, per_sample }
    }

    /// Standard error of the batch mean.
    pub fn stderr(&self) -> f64 {
        let n = self.per_sample.len();
        if n < 2 {
            return 0.0;
        }
        let var = self.per_sample.iter().map(|v| (v - self.loss).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Bregman term for one `(s, r)` pair, written in terms of `ln s`.
pub(crate) fn bregman(log_s: f64, r: f64) -> f64 {
    if r > 0.0 {
        log_s.exp() - r * log_s + r * (r.ln() - 1.0)
    } else {
        log_s.exp()
    }
}

/// Conditional ratios and weights of one position.
fn row_terms(kernel: RateKernel, noise: &NoiseSchedule, x0: usize, xt: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let sb = noise.sigma_bar(t);
    let sigma = noise.sigma(t);
    let m = kernel.num_states();
    let denom = kernel.transition_unchecked(sb, x0, xt);
    let mut target = vec![0.0; m];
    let mut weight = vec![0.0; m];
    for y in 0..m {
        if y == xt {
            target[y] = 1.0;
        } else {
            target[y] = kernel.transition_unchecked(sb, x0, y) / denom;
            weight[y] = sigma * kernel.rate(y, xt);
        }
    }
    (target, weight)
}

impl LossBatch {
    /// Corrupt each data sequence at an independent uniform time.
    pub fn draw(kernel: RateKernel, noise: &NoiseSchedule, data: &[&[usize]], rng: &mut Rng) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::config("loss batch must be nonempty"));
        }
        let mut items = Vec::with_capacity(data.len());
        let mut rows = Vec::new();
        for (item, x0) in data.iter().enumerate() {
            for &tok in x0.iter() {
                kernel.check_state(tok)?;
            }
            let t = rng.random_range(TIME_FLOOR..=1.0);
            let sb = noise.sigma_bar(t);
            let xt: Vec<usize> = x0.iter().map(|&tok| kernel.sample_forward(tok, sb, rng)).collect();
            for pos in active_positions(kernel, &xt) {
                let (target, weight) = row_terms(kernel, noise, x0[pos], xt[pos], t);
                rows.push(LossRow { item, pos, target, weight });
            }
            items.push((xt, t));
        }
        Ok(LossBatch { items, rows })
    }

    /// Loss of `score` on this batch.
    pub fn evaluate(&self, score: &dyn ScoreModel) -> Result<DwdseLossValue> {
        let mut per_sample = vec![0.0; self.items.len()];
        let mut start = 0;
        while start < self.rows.len() {
            let item = self.rows[start].item;
            let end = start + self.rows[start..].iter().take_while(|r| r.item == item).count();
            let (xt, t) = &self.items[item];
            let positions: Vec<usize> = self.rows[start..end].iter().map(|r| r.pos).collect();
            let ratios = score.score_at(xt, &positions, *t)?;
            for (row, s) in self.rows[start..end].iter().zip(&ratios) {
                per_sample[item] += row_loss(row, s, xt[row.pos]);
            }
            start = end;
        }
        if let Some(v) = per_sample.iter().find(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite score-entropy loss {v}")));
        }
        Ok(DwdseLossValue::from_samples(per_sample))
    }
}

fn row_loss(row: &LossRow, s: &[f64], current: usize) -> f64 {
    (0..s.len())
        .filter(|&y| y != current && row.weight[y] != 0.0)
        .map(|y| row.weight[y] * bregman(s[y].ln(), row.target[y]))
        .sum()
}

/// Draw a batch and evaluate the loss of `score` on it.
pub fn dwdse_loss(
    score: &dyn ScoreModel,
    noise: &NoiseSchedule,
    data: &[&[usize]],
    rng: &mut Rng,
) -> Result<DwdseLossValue> {
    LossBatch::draw(score.kernel(), noise, data, rng)?.evaluate(score)
}

/// Exact expected loss of a single-token model over `x0 ~ p0` and
/// `x_t | x0`, averaged over the given times.
pub fn expected_dwdse_exact(score: &dyn ScoreModel, noise: &NoiseSchedule, p0: &Distribution, times: &[f64]) -> Result<f64> {
    let kernel = score.kernel();
    let m = kernel.num_states();
    let p0 = p0.padded(m)?;
    let mut total = 0.0;
    for &t in times {
        let sb = noise.sigma_bar(t);
        for xt in 0..m {
            if active_positions(kernel, &[xt]).is_empty() {
                continue;
            }
            let s = score.score_at(&[xt], &[0], t)?.remove(0);
            for (x0, &w0) in p0.probs().iter().enumerate() {
                let pt = kernel.transition_unchecked(sb, x0, xt);
                if w0 == 0.0 || pt == 0.0 {
                    continue;
                }
                let (target, weight) = row_terms(kernel, noise, x0, xt, t);
                let row = LossRow { item: 0, pos: 0, target, weight };
                total += w0 * pt * row_loss(&row, &s, xt);
            }
        }
    }
    Ok(total / times.len() as f64)
}
