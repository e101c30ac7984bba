//! Monte Carlo estimation of the non-adiabatic entropy rate and the
//! dynamical activity from a score model.

use rand::Rng as _;
use rayon::prelude::*;

use super::EntropyCurve;
use crate::ctmc::{Distribution, NoiseSchedule, RateKernel};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::score::{active_positions, Ratios, ScoreModel};

/// Per-sequence contributions `(h_na, activity)` at state `x`, time `t`.
///
/// Reversible kernels: `Σ_i Σ_{y≠x_i} σ Q(y, x_i) s_y ln s_y`. Absorbing
/// kernel: each masked position contributes `σ Σ_y s_y (ln S − ln s_y)` with
/// `S = Σ_y s_y` the total unmasking odds. Activity is the total reverse
/// jump rate out of `x`.
pub fn sample_contributions(score: &dyn ScoreModel, noise: &NoiseSchedule, x: &[usize], t: f64) -> Result<(f64, f64)> {
    let positions = active_positions(score.kernel(), x);
    if positions.is_empty() {
        return Ok((0.0, 0.0));
    }
    let ratios = score.score_at(x, &positions, t)?;
    contributions(score.kernel(), noise.sigma(t), x, &positions, &ratios, t)
}

fn contributions(kernel: RateKernel, sigma: f64, x: &[usize], positions: &[usize], ratios: &Ratios, t: f64) -> Result<(f64, f64)> {
    let mut h = 0.0;
    let mut a = 0.0;
    for (&pos, s) in positions.iter().zip(ratios) {
        let xi = x[pos];
        let bad = |y: usize| {
            Error::numerical(format!("ratio {} at position {pos}, state {y}, t = {t}", s[y]))
        };
        match kernel {
            RateKernel::Uniform { .. } => {
                for (y, &sy) in s.iter().enumerate() {
                    if y == xi {
                        continue;
                    }
                    if !(sy.is_finite() && sy > 0.0) {
                        return Err(bad(y));
                    }
                    let w = sigma * kernel.rate(y, xi);
                    h += w * sy * sy.ln();
                    a += w * sy;
                }
            }
            RateKernel::Absorbing { vocab } => {
                if let Some(y) = (0..vocab).find(|&y| !(s[y].is_finite() && s[y] > 0.0)) {
                    return Err(bad(y));
                }
                let total: f64 = s[..vocab].iter().sum();
                let ln_total = total.ln();
                h += sigma * s[..vocab].iter().map(|&sy| sy * (ln_total - sy.ln())).sum::<f64>();
                a += sigma * total;
            }
        }
    }
    Ok((h, a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub h_na: f64,
    pub h_na_se: f64,
    pub activity: f64,
    pub activity_se: f64,
    pub n: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimate `h_na(t)` and `A(t)` from states drawn from the marginal at `t`.
pub fn h_na_estimate(score: &dyn ScoreModel, noise: &NoiseSchedule, t: f64, batch: &[Vec<usize>]) -> Result<PointEstimate> {
    if batch.is_empty() {
        return Err(Error::config("estimation batch must be nonempty"));
    }
    let kernel = score.kernel();
    let sigma = noise.sigma(t);
    let xs: Vec<&[usize]> = batch.iter().map(|x| x.as_slice()).collect();
    let positions: Vec<Vec<usize>> = batch.iter().map(|x| active_positions(kernel, x)).collect();
    let ratios = score.score_many(&xs, &positions, t)?;
    let mut hs = Vec::with_capacity(batch.len());
    let mut acts = Vec::with_capacity(batch.len());
    for ((x, p), r) in batch.iter().zip(&positions).zip(&ratios) {
        let (h, a) = contributions(kernel, sigma, x, p, r, t)?;
        hs.push(h);
        acts.push(a);
    }
    let (h_na, h_na_se) = mean_se(&hs);
    let (activity, activity_se) = mean_se(&acts);
    Ok(PointEstimate { h_na, h_na_se, activity, activity_se, n: batch.len() })
}

/// Where clean data samples come from.
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// Draw sequences uniformly with replacement.
    Sequences(&'a [Vec<usize>]),
    /// Draw single tokens from a distribution.
    Token(&'a Distribution),
}

impl DataSource<'_> {
    pub fn draw(&self, rng: &mut Rng) -> Vec<usize> {
        match self {
            DataSource::Sequences(data) => data[rng.random_range(0..data.len())].clone(),
            DataSource::Token(p) => vec![p.sample_with(rng.random::<f64>())],
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            DataSource::Sequences([]) => Err(Error::config("dataset is empty")),
            _ => Ok(()),
        }
    }
}

/// `x_t` samples at time `t` obtained by corrupting clean draws.
pub fn corrupted_batch(kernel: RateKernel, noise: &NoiseSchedule, data: DataSource<'_>, t: f64, n: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let sb = noise.sigma_bar(t);
    (0..n)
        .map(|_| data.draw(rng).into_iter().map(|tok| kernel.sample_forward(tok, sb, rng)).collect())
        .collect()
}

/// `n_tau` equispaced times on `[TIME_FLOOR, 1]`.
pub fn time_grid(n_tau: usize) -> Result<Vec<f64>> {
    if n_tau < 2 {
        return Err(Error::config("time grid needs at least 2 points"));
    }
    let lo = crate::score::TIME_FLOOR;
    let h = (1.0 - lo) / (n_tau - 1) as f64;
    let mut g: Vec<f64> = (0..n_tau).map(|k| lo + k as f64 * h).collect();
    g[n_tau - 1] = 1.0;
    Ok(g)
}

/// Estimate the entropy curve on an `n_tau`-point grid with `n` samples per
/// point. Grid point `k` uses stream `(seed, k)`, so the result does not
/// depend on the thread count.
pub fn sweep_curves(
    score: &dyn ScoreModel,
    noise: &NoiseSchedule,
    data: DataSource<'_>,
    n: usize,
    n_tau: usize,
    seed: u64,
) -> Result<EntropyCurve> {
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    data.check()?;
    let grid = time_grid(n_tau)?;
    let kernel = score.kernel();
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut rng = rng::stream(seed, rng::domain::ESTIMATE, k as u64);
            let batch = corrupted_batch(kernel, noise, data, t, n, &mut rng);
            h_na_estimate(score, noise, t, &batch)
        })
        .collect::<Result<Vec<_>>>()?;
    EntropyCurve::from_estimates(grid, &points, n)
}
