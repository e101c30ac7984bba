//! Adam training of [`MlpScore`] on the score-entropy objective.

use ndarray::{Array2, Zip};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::loss::{bregman, DwdseLossValue, LossBatch};
use super::mlp::{MlpParams, MlpScore, RowInputs};
use crate::ctmc::NoiseSchedule;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one (cosine decay).
    pub final_lr_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 20_000,
            batch_size: 64,
            learning_rate: 2e-3,
            final_lr_fraction: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch loss before each update.
    pub losses: Vec<f64>,
    pub params: MlpParams,
}

impl TrainReport {
    /// Trailing moving average of the loss with the given window.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        moving_average(&self.losses, window)
    }
}

pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || xs.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(xs.len() - window + 1);
    let mut acc: f64 = xs[..window].iter().sum();
    out.push(acc / window as f64);
    for i in window..xs.len() {
        acc += xs[i] - xs[i - window];
        out.push(acc / window as f64);
    }
    out
}

/// Network inputs for every row of a batch.
pub(crate) fn batch_inputs(model: &MlpScore, batch: &LossBatch) -> Result<RowInputs> {
    let arch = &model.params().arch;
    let n = batch.rows.len();
    let mut tokens = Array2::zeros((n, arch.window()));
    let mut time = Array2::zeros((n, arch.time_features));
    let mut feats: Vec<Option<Vec<f64>>> = vec![None; batch.items.len()];
    for (i, row) in batch.rows.iter().enumerate() {
        let (xt, t) = &batch.items[row.item];
        let f = feats[row.item].get_or_insert_with(|| model.time_features(*t));
        let one = model.params().row_inputs(xt, &[row.pos], f)?;
        tokens.row_mut(i).assign(&one.tokens.row(0));
        time.row_mut(i).assign(&one.time.row(0));
    }
    Ok(RowInputs { tokens, time })
}

/// Batch loss and its gradient with respect to every network parameter.
pub fn loss_and_grad(model: &MlpScore, batch: &LossBatch) -> Result<(DwdseLossValue, MlpParams)> {
    let params = model.params();
    let input = batch_inputs(model, batch)?;
    let cache = params.forward(&input);
    let n_items = batch.items.len() as f64;
    let mut per_sample = vec![0.0; batch.items.len()];
    let mut d_out = Array2::zeros(cache.out.dim());
    for (i, row) in batch.rows.iter().enumerate() {
        let current = batch.items[row.item].0[row.pos];
        for y in 0..row.weight.len() {
            let w = row.weight[y];
            if y == current || w == 0.0 {
                continue;
            }
            let z = cache.out[[i, y]];
            per_sample[row.item] += w * bregman(z, row.target[y]);
            d_out[[i, y]] = w * (z.exp() - row.target[y]) / n_items;
        }
    }
    let loss = per_sample.iter().sum::<f64>() / n_items;
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite training loss {loss}")));
    }
    let grad = params.backward(&input, &cache, &d_out);
    if !grad.is_finite() {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok((DwdseLossValue { loss, per_sample }, grad))
}

struct Adam {
    m: MlpParams,
    v: MlpParams,
    t: i32,
}

impl Adam {
    fn new(params: &MlpParams) -> Self {
        Adam { m: MlpParams::zeros(params.arch.clone()), v: MlpParams::zeros(params.arch.clone()), t: 0 }
    }

    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.adam_eps);
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (k, layer) in params.layers.iter_mut().enumerate() {
            let (gl, ml, vl) = (&grad.layers[k], &mut self.m.layers[k], &mut self.v.layers[k]);
            Zip::from(&mut layer.w).and(&gl.w).and(&mut ml.w).and(&mut vl.w).for_each(update);
            Zip::from(&mut layer.b).and(&gl.b).and(&mut ml.b).and(&mut vl.b).for_each(update);
        }
    }
}

fn learning_rate(cfg: &TrainConfig, step: usize) -> f64 {
    let progress = step as f64 / cfg.steps.max(1) as f64;
    let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
    cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cosine)
}

/// Train `model` on `dataset` and return the final parameters with the loss
/// trajectory. Each step draws a minibatch without replacement (or the whole
/// dataset if smaller) from a stream fixed by `cfg.seed`.
pub fn train(model: MlpScore, noise: &NoiseSchedule, dataset: &[Vec<usize>], cfg: &TrainConfig) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::config("learning_rate must be positive"));
    }
    let kernel = crate::score::ScoreModel::kernel(&model);
    let mut model = model;
    let mut adam = Adam::new(model.params());
    let mut rng: Rng = rng::stream(cfg.seed, rng::domain::TRAIN, 0);
    let batch_size = cfg.batch_size.min(dataset.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let picks = sample(&mut rng, dataset.len(), batch_size);
        let refs: Vec<&[usize]> = picks.iter().map(|i| dataset[i].as_slice()).collect();
        let batch = LossBatch::draw(kernel, noise, &refs, &mut rng)?;
        let (value, grad) = loss_and_grad(&model, &batch)
            .map_err(|e| Error::numerical(format!("training step {step}: {e}")))?;
        losses.push(value.loss);
        let mut params = model.into_params();
        adam.step(&mut params, &grad, learning_rate(cfg, step), cfg);
        if !params.is_finite() {
            return Err(Error::numerical(format!("non-finite parameters after step {step}")));
        }
        model = MlpScore::new(params, kernel, *noise)?;
        if step % 1000 == 0 {
            log::debug!("step {step}: loss {:.5}", value.loss);
        }
    }
    Ok(TrainReport { losses, params: model.into_params() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::RateKernel;
    use crate::score::{MlpArch, ScoreModel};

    fn toy() -> (MlpScore, NoiseSchedule, Vec<Vec<usize>>) {
        let kernel = RateKernel::absorbing(4).unwrap();
        let noise = NoiseSchedule::toy_default();
        let arch = MlpArch::new(5, 1, 4, vec![16, 16]).unwrap();
        let model = MlpScore::new(MlpParams::init(arch, 2), kernel, noise).unwrap();
        let data = (0..32).map(|i| vec![i % 4, (i / 4) % 4, 3, (i + 1) % 4]).collect();
        (model, noise, data)
    }

    #[test]
    fn zero_steps_leave_params_unchanged() {
        let (model, noise, data) = toy();
        let before = model.params().clone();
        let cfg = TrainConfig { steps: 0, ..TrainConfig::default() };
        let report = train(model, &noise, &data, &cfg).unwrap();
        assert_eq!(report.params, before);
        assert!(report.losses.is_empty());
    }

    #[test]
    fn loss_matches_generic_evaluation() {
        let (model, noise, data) = toy();
        let refs: Vec<&[usize]> = data.iter().map(|v| v.as_slice()).collect();
        let batch = LossBatch::draw(model.kernel(), &noise, &refs, &mut rng::stream(3, rng::domain::LOSS, 0)).unwrap();
        let (v, _) = loss_and_grad(&model, &batch).unwrap();
        let generic = batch.evaluate(&model).unwrap();
        assert_close!(v.loss, generic.loss, 1e-10);
    }

    #[test]
    fn training_reduces_loss_and_is_reproducible() {
        let (model, noise, data) = toy();
        let cfg = TrainConfig { steps: 300, batch_size: 16, learning_rate: 3e-3, seed: 9, ..TrainConfig::default() };
        let a = train(model.clone(), &noise, &data, &cfg).unwrap();
        let b = train(model, &noise, &data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        let ma = a.moving_average(50);
        assert!(ma.last().unwrap() < &ma[0]);
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
        assert!(moving_average(&[1.0], 2).is_empty());
    }
}
