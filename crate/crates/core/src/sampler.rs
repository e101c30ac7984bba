//! Euler tau-leaping for the reverse process.
//!
//! Within a step from `t_from` down to `t_to`, reverse rates are frozen at
//! `t_from`: position `i` of `x` jumps to `y` at base rate
//! `R(y) = Q(y, x_i) s(x, t_from)_{i,y}`, and the elapsed time is the
//! cumulative-noise increment `Δσ̄ = σ̄(t_from) − σ̄(t_to)`. Each position jumps
//! at most once per step, with probability `1 − exp(−R_total Δσ̄)`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{DiffusionConfig, NoiseSchedule, RateKernel};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::scheduler::TimeSchedule;
use crate::score::{active_positions, Ratios, ScoreModel};

/// A batch of sequences mid-sampling, each with its own RNG stream.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub sequences: Vec<Vec<usize>>,
    /// Tokens forced to their most likely target at the final step.
    pub forced: Vec<usize>,
    rngs: Vec<Rng>,
}

/// Draw `batch` sequences of `length` tokens from the prior. Sequence `i`
/// owns stream `(seed, i)` for initialization and every later step.
pub fn init_from_prior(kernel: RateKernel, batch: usize, length: usize, seed: u64) -> Result<SamplerState> {
    if batch == 0 || length == 0 {
        return Err(Error::config("batch size and sequence length must be positive"));
    }
    let mut rngs: Vec<Rng> = (0..batch).map(|i| rng::stream(seed, rng::domain::SAMPLE, i as u64)).collect();
    let sequences = rngs.iter_mut().map(|r| (0..length).map(|_| kernel.sample_prior(r)).collect()).collect();
    Ok(SamplerState { sequences, forced: vec![0; batch], rngs })
}

/// Sequences scored together in one batched call.
const SCORE_CHUNK: usize = 64;

/// One tau-leaping step on a single sequence. With `force_unmask`, masked
/// tokens that did not jump take their largest-rate target. Returns the
/// number of forced tokens.
pub fn tau_leap_sequence(
    x: &mut [usize],
    score: &dyn ScoreModel,
    noise: &NoiseSchedule,
    t_from: f64,
    t_to: f64,
    force_unmask: bool,
    rng: &mut Rng,
) -> Result<usize> {
    check_step(t_from, t_to)?;
    let positions = active_positions(score.kernel(), x);
    if positions.is_empty() {
        return Ok(0);
    }
    let ratios = score.score_at(x, &positions, t_from)?;
    let dt = noise.sigma_bar_increment(t_from, t_to);
    apply_jumps(score.kernel(), x, &positions, &ratios, dt, t_from, force_unmask, rng)
}

fn check_step(t_from: f64, t_to: f64) -> Result<()> {
    if !(t_from >= t_to && t_to >= 0.0) {
        return Err(Error::domain(format!("tau-leap step needs t_from >= t_to >= 0, got {t_from} -> {t_to}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn apply_jumps(
    kernel: RateKernel,
    x: &mut [usize],
    positions: &[usize],
    ratios: &Ratios,
    dt: f64,
    t_from: f64,
    force_unmask: bool,
    rng: &mut Rng,
) -> Result<usize> {
    let mask = kernel.mask();
    let mut forced = 0;
    let mut rates = vec![0.0; kernel.num_states()];
    for (&pos, s) in positions.iter().zip(ratios) {
        let xi = x[pos];
        let mut total = 0.0;
        for (y, r) in rates.iter_mut().enumerate() {
            *r = if y == xi { 0.0 } else { kernel.rate(y, xi) * s[y] };
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::numerical(format!("reverse rate {r} at position {pos}, state {y}, t = {t_from}")));
            }
            total += *r;
        }
        let jump = total > 0.0 && rng.random::<f64>() < -(-total * dt).exp_m1();
        if jump {
            let mut u = rng.random::<f64>() * total;
            let mut dest = xi;
            for (y, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    dest = y;
                    if u < r {
                        break;
                    }
                    u -= r;
                }
            }
            x[pos] = dest;
        } else if force_unmask && Some(xi) == mask && total > 0.0 {
            let best = (0..rates.len()).fold(0, |b, y| if rates[y] > rates[b] { y } else { b });
            x[pos] = best;
            forced += 1;
        }
    }
    Ok(forced)
}

/// Apply one step to every sequence of the batch. Sequences are scored in
/// fixed-size chunks, processed in parallel.
pub fn tau_leap_step(
    state: &mut SamplerState,
    score: &dyn ScoreModel,
    noise: &NoiseSchedule,
    t_from: f64,
    t_to: f64,
    force_unmask: bool,
) -> Result<()> {
    check_step(t_from, t_to)?;
    let kernel = score.kernel();
    let dt = noise.sigma_bar_increment(t_from, t_to);
    let forced: Vec<Vec<usize>> = state
        .sequences
        .par_chunks_mut(SCORE_CHUNK)
        .zip(state.rngs.par_chunks_mut(SCORE_CHUNK))
        .map(|(xs, rngs)| {
            let positions: Vec<Vec<usize>> = xs.iter().map(|x| active_positions(kernel, x)).collect();
            let refs: Vec<&[usize]> = xs.iter().map(|x| x.as_slice()).collect();
            let ratios = score.score_many(&refs, &positions, t_from)?;
            xs.iter_mut()
                .zip(rngs.iter_mut())
                .zip(positions.iter().zip(&ratios))
                .map(|((x, r), (p, s))| apply_jumps(kernel, x, p, s, dt, t_from, force_unmask, r))
                .collect()
        })
        .collect::<Result<_>>()?;
    for (total, f) in state.forced.iter_mut().zip(forced.into_iter().flatten()) {
        *total += f;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub sequences: Vec<Vec<usize>>,
    /// Score evaluations per sequence (one per step).
    pub nfe: usize,
    pub forced: Vec<usize>,
}

/// Walk `schedule` from its last time down to its first.
pub fn sample(
    schedule: &TimeSchedule,
    score: &dyn ScoreModel,
    noise: &NoiseSchedule,
    batch: usize,
    length: usize,
    seed: u64,
) -> Result<SampleOutput> {
    schedule.validate()?;
    let mut state = init_from_prior(score.kernel(), batch, length, seed)?;
    let k = schedule.k;
    for (step, (t_from, t_to)) in schedule.steps().enumerate() {
        tau_leap_step(&mut state, score, noise, t_from, t_to, step + 1 == k)?;
    }
    Ok(SampleOutput { sequences: state.sequences, nfe: k, forced: state.forced })
}

/// Space-separated token rows, one sequence per line.
pub fn samples_to_text(sequences: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for s in sequences {
        let row: Vec<String> = s.iter().map(|t| t.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn samples_from_text(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|f| f.parse::<usize>().map_err(|e| Error::Parse { line: i + 1, msg: format!("{f:?}: {e}") }))
                .collect()
        })
        .collect()
}

/// Sidecar metadata of a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub version: u32,
    pub schedule_sha256: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub nfe: usize,
    pub seed: u64,
    pub count: usize,
    pub length: usize,
    pub forced_tokens: usize,
    pub kernel: DiffusionConfig,
    pub samples_sha256: String,
}
