//! Sampling-time schedules: uniform, entropic (equal steps of cumulative
//! non-adiabatic entropy) and Wasserstein (equal steps of the cumulative
//! speed-limit bound).
//!
//! All schedules live on the noise-time axis `[TIME_FLOOR, 1]`; the sampler
//! walks them from 1 down to the floor.

use serde::{Deserialize, Serialize};

use crate::ctmc::DiffusionConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::score::TIME_FLOOR;
use crate::thermo::{EntropyCurve, WassersteinCurve};

/// Tolerance for decreases in a cumulative curve.
const MONOTONE_TOL: f64 = 1e-12;

/// Cumulative progress `C(t)` on a grid, shifted so `C(t_0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressCurve {
    pub t: Vec<f64>,
    pub cum: Vec<f64>,
}

impl ProgressCurve {
    pub fn from_cumulative(t: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != cum.len() {
            return Err(Error::InvalidCurve("progress curve needs >= 2 points and matching columns".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCurve("grid not strictly increasing".into()));
        }
        if cum.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("non-finite cumulative progress".into()));
        }
        if let Some(k) = cum.windows(2).position(|w| w[1] < w[0] - MONOTONE_TOL) {
            return Err(Error::InvalidCurve(format!("cumulative progress decreases at index {}", k + 1)));
        }
        // Clip sub-tolerance decreases and start from zero.
        let c0 = cum[0];
        let mut run = 0.0f64;
        let cum = cum
            .iter()
            .map(|&c| {
                run = run.max(c - c0);
                run
            })
            .collect();
        Ok(ProgressCurve { t, cum })
    }

    /// Cumulative trapezoid integral of a rate clamped at 0.
    pub fn from_rate(t: Vec<f64>, rate: &[f64]) -> Result<Self> {
        if rate.len() != t.len() || rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("rate must be finite and match the grid".into()));
        }
        let clamped: Vec<f64> = rate.iter().map(|v| v.max(0.0)).collect();
        let cum = crate::thermo::cumulative_trapezoid(&t, &clamped);
        ProgressCurve::from_cumulative(t, cum)
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().expect("curve is nonempty")
    }
}

/// Normalized warping function `Φ = C / C(T)` on the progress grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Warp {
    /// Piecewise-linear evaluation of `Φ` at `x` (clamped to the grid).
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.phi[0];
        }
        if x >= self.t[n - 1] {
            return self.phi[n - 1];
        }
        let j = self.t.partition_point(|&u| u <= x);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let (p0, p1) = (self.phi[j - 1], self.phi[j]);
        p0 + (p1 - p0) * (x - t0) / (t1 - t0)
    }
}

pub fn warp(progress: &ProgressCurve) -> Result<Warp> {
    let total = progress.total();
    if !(total > 0.0) {
        return Err(Error::DegenerateProgress(total));
    }
    let mut phi: Vec<f64> = progress.cum.iter().map(|c| c / total).collect();
    *phi.last_mut().expect("curve is nonempty") = 1.0;
    Ok(Warp { t: progress.t.clone(), phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uniform,
    Eds,
    Wds,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Uniform, Strategy::Eds, Strategy::Wds];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Eds => "eds",
            Strategy::Wds => "wds",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "eds" => Ok(Strategy::Eds),
            "wds" => Ok(Strategy::Wds),
            other => Err(Error::config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `K + 1` strictly increasing times from the floor to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSchedule {
    pub version: u32,
    pub strategy: Strategy,
    #[serde(rename = "K")]
    pub k: usize,
    pub times: Vec<f64>,
    pub kernel: Option<DiffusionConfig>,
    pub source_curve_sha256: Option<String>,
    pub seed: Option<u64>,
}

impl TimeSchedule {
    pub fn new(strategy: Strategy, times: Vec<f64>) -> Result<Self> {
        let s = TimeSchedule {
            version: 1,
            strategy,
            k: times.len().saturating_sub(1),
            times,
            kernel: None,
            source_curve_sha256: None,
            seed: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_provenance(mut self, kernel: DiffusionConfig, curve_sha256: Option<String>, seed: Option<u64>) -> Self {
        self.kernel = Some(kernel);
        self.source_curve_sha256 = curve_sha256;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::config(format!("unsupported schedule version {}", self.version)));
        }
        if self.k < 1 || self.times.len() != self.k + 1 {
            return Err(Error::config(format!("schedule with K = {} has {} times", self.k, self.times.len())));
        }
        if self.times.iter().any(|t| !t.is_finite()) || self.times[0] < 0.0 || self.times[self.k] > 1.0 {
            return Err(Error::config("schedule times must lie in [0, 1]"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("schedule times must be strictly increasing"));
        }
        Ok(())
    }

    /// Steps as `(t_from, t_to)` pairs in sampling order (decreasing time).
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).rev().map(|w| (w[1], w[0]))
    }

    pub fn to_json(&self) -> Result<String> {
        io::to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: TimeSchedule = serde_json::from_str(text).map_err(|e| Error::config(format!("bad schedule file: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Hash of the canonical JSON form.
    pub fn sha256(&self) -> Result<String> {
        Ok(io::sha256_hex(self.to_json()?.as_bytes()))
    }
}

/// `t_k = Φ⁻¹(k / K)` by piecewise-linear inversion; plateaus resolve to
/// their left end and the endpoints are pinned to the grid ends.
pub fn invert_schedule(phi: &Warp, k: usize, strategy: Strategy) -> Result<TimeSchedule> {
    if k < 1 {
        return Err(Error::config("schedule needs K >= 1"));
    }
    let n = phi.t.len();
    if n < 2 || phi.phi.len() != n {
        return Err(Error::InvalidCurve("warp needs >= 2 points".into()));
    }
    if let Some(j) = phi.phi.windows(2).position(|w| w[1] < w[0] - MONOTONE_TOL) {
        return Err(Error::InvalidCurve(format!("warping function decreases at index {}", j + 1)));
    }
    let mut times = Vec::with_capacity(k + 1);
    times.push(phi.t[0]);
    for level in 1..k {
        let target = level as f64 / k as f64;
        let j = phi.phi.partition_point(|&p| p < target).clamp(1, n - 1);
        let (p0, p1) = (phi.phi[j - 1], phi.phi[j]);
        let (t0, t1) = (phi.t[j - 1], phi.t[j]);
        let mut t = if p1 <= target || p1 <= p0 { t1 } else { t0 + (target - p0) / (p1 - p0) * (t1 - t0) };
        let prev = *times.last().expect("nonempty");
        if t <= prev {
            t = prev.next_up();
        }
        times.push(t);
    }
    let end = phi.t[n - 1];
    if *times.last().expect("nonempty") >= end {
        return Err(Error::InvalidCurve("schedule collapses onto the final grid point; K too large".into()));
    }
    times.push(end);
    TimeSchedule::new(strategy, times)
}

pub fn uniform_schedule(k: usize) -> Result<TimeSchedule> {
    if k < 1 {
        return Err(Error::config("schedule needs K >= 1"));
    }
    let h = (1.0 - TIME_FLOOR) / k as f64;
    let mut times: Vec<f64> = (0..=k).map(|i| TIME_FLOOR + i as f64 * h).collect();
    times[k] = 1.0;
    TimeSchedule::new(Strategy::Uniform, times)
}

pub fn eds_schedule(entropy: &EntropyCurve, k: usize) -> Result<TimeSchedule> {
    let progress = ProgressCurve::from_cumulative(entropy.t.clone(), entropy.h_na_cum.clone())?;
    invert_schedule(&warp(&progress)?, k, Strategy::Eds)
}

pub fn wds_schedule(wass: &WassersteinCurve, k: usize) -> Result<TimeSchedule> {
    let progress = ProgressCurve::from_cumulative(wass.t.clone(), wass.cum.clone())?;
    invert_schedule(&warp(&progress)?, k, Strategy::Wds)
}

/// Replace a degenerate-progress failure by the uniform schedule. Returns
/// the schedule and whether the fallback was taken.
pub fn or_uniform(result: Result<TimeSchedule>, k: usize) -> Result<(TimeSchedule, bool)> {
    match result {
        Err(Error::DegenerateProgress(total)) => {
            log::warn!("progress curve is degenerate (total {total}); using the uniform schedule");
            Ok((uniform_schedule(k)?, true))
        }
        other => other.map(|s| (s, false)),
    }
}

/// Build the schedule for `strategy` from estimated curves, falling back to
/// uniform when the relevant progress is degenerate.
pub fn build_schedule(
    strategy: Strategy,
    k: usize,
    entropy: &EntropyCurve,
    wass: &WassersteinCurve,
) -> Result<(TimeSchedule, bool)> {
    match strategy {
        Strategy::Uniform => Ok((uniform_schedule(k)?, false)),
        Strategy::Eds => or_uniform(eds_schedule(entropy, k), k),
        Strategy::Wds => or_uniform(wds_schedule(wass, k), k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    fn warp_of(f: impl Fn(f64) -> f64, n: usize) -> Warp {
        let t = grid(n);
        let c = t.iter().map(|&x| f(x)).collect();
        warp(&ProgressCurve::from_cumulative(t, c).unwrap()).unwrap()
    }

    #[test]
    fn identity_warp() {
        let w = warp_of(|t| t, 11);
        assert_eq!(w.phi, w.t);
        let s = invert_schedule(&w, 4, Strategy::Eds).unwrap();
        for (a, b) in s.times.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert_close!(*a, b, 1e-15);
        }
    }

    #[test]
    fn quadratic_warp() {
        let w = warp_of(|t| t * t, 10_001);
        assert_close!(w.eval(0.5), 0.25, 1e-12);
        let s = invert_schedule(&w, 4, Strategy::Eds).unwrap();
        for (k, t) in s.times.iter().enumerate() {
            assert_close!(*t, (k as f64 / 4.0).sqrt(), 1e-6);
        }
    }

    #[test]
    fn sqrt_progress() {
        let w = warp_of(|t| t.sqrt(), 20_001);
        let s = invert_schedule(&w, 8, Strategy::Wds).unwrap();
        for (k, t) in s.times.iter().enumerate() {
            assert_close!(*t, (k as f64 / 8.0).powi(2), 1e-6);
        }
    }

    #[test]
    fn single_step_is_endpoints() {
        let s = invert_schedule(&warp_of(|t| t * t, 5), 1, Strategy::Eds).unwrap();
        assert_eq!(s.times, vec![0.0, 1.0]);
        assert_eq!(uniform_schedule(1).unwrap().times, vec![TIME_FLOOR, 1.0]);
    }

    #[test]
    fn uniform_examples() {
        let s = uniform_schedule(2).unwrap();
        assert_eq!(s.times, vec![TIME_FLOOR, (1.0 + TIME_FLOOR) / 2.0, 1.0]);
        let s = uniform_schedule(64).unwrap();
        let g: Vec<f64> = s.times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(g.iter().all(|d| (d - g[0]).abs() < 1e-15));
    }

    #[test]
    fn plateaus_resolve_to_smallest_time() {
        // Progress only on [0.5, 1].
        let w = warp_of(|t| (t - 0.5).max(0.0), 101);
        let s = invert_schedule(&w, 4, Strategy::Eds).unwrap();
        assert!(s.times[1..4].iter().all(|&t| t >= 0.5));
        // Flat between 0.3 and 0.7 at level 1/2.
        let w = warp_of(|t| if t < 0.3 { t } else if t < 0.7 { 0.3 } else { t - 0.4 }, 101);
        let s = invert_schedule(&w, 2, Strategy::Eds).unwrap();
        assert_close!(s.times[1], 0.3, 1e-12);
    }

    #[test]
    fn degenerate_progress() {
        let p = ProgressCurve::from_cumulative(grid(5), vec![0.0; 5]).unwrap();
        assert!(matches!(warp(&p), Err(Error::DegenerateProgress(_))));
        let (s, fell_back) = or_uniform(Err(Error::DegenerateProgress(0.0)), 4).unwrap();
        assert!(fell_back);
        assert_eq!(s, uniform_schedule(4).unwrap());
    }

    #[test]
    fn non_monotone_curve_is_rejected() {
        assert!(matches!(
            ProgressCurve::from_cumulative(grid(3), vec![0.0, 0.5, 0.4]),
            Err(Error::InvalidCurve(_))
        ));
        let w = Warp { t: grid(3), phi: vec![0.0, 0.6, 0.5] };
        assert!(invert_schedule(&w, 2, Strategy::Eds).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = uniform_schedule(3).unwrap().with_provenance(
            DiffusionConfig::new(
                crate::ctmc::RateKernel::absorbing(32).unwrap(),
                crate::ctmc::NoiseSchedule::toy_default(),
            ),
            Some("ab".into()),
            Some(7),
        );
        let text = s.to_json().unwrap();
        assert!(text.contains("\"K\": 3"));
        assert_eq!(TimeSchedule::from_json(&text).unwrap(), s);
        let bad = text.replace("\"K\": 3", "\"K\": 4");
        assert!(TimeSchedule::from_json(&bad).is_err());
    }

    #[test]
    fn steps_walk_downward() {
        let s = uniform_schedule(2).unwrap();
        let steps: Vec<_> = s.steps().collect();
        assert_eq!(steps[0].0, 1.0);
        assert_eq!(steps[1].1, TIME_FLOOR);
    }
}
