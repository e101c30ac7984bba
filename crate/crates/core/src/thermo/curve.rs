use serde::{Deserialize, Serialize};

use super::estimate::PointEstimate;
use super::ExactChain;
use crate::error::{Error, Result};
use crate::io::fmt17;

/// Cumulative trapezoid integral of `y` over the grid `t`, starting at 0.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for k in 0..t.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
        }
        out.push(acc);
    }
    out
}

fn clamped(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.max(0.0)).collect()
}

fn check_grid(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Err(Error::InvalidCurve("curve needs at least 2 grid points".into()));
    }
    if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidCurve(format!("grid not strictly increasing at index {}", k + 1)));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCurve("non-finite grid time".into()));
    }
    Ok(())
}

/// Entropy-production and activity rates on a time grid.
///
/// `h_na` holds raw (possibly slightly negative) estimates; `h_na_cum`
/// integrates the rates clamped at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCurve {
    pub t: Vec<f64>,
    pub h_na: Vec<f64>,
    pub h_na_se: Vec<f64>,
    pub h_na_cum: Vec<f64>,
    pub activity: Vec<f64>,
    /// Exact mode only; `+inf` where divergent.
    pub h_ad: Option<Vec<f64>>,
    pub h_tot: Option<Vec<f64>>,
    pub mobility: Option<Vec<f64>>,
    /// Monte Carlo samples per grid point (0 for exact curves).
    pub n_samples: usize,
}

impl EntropyCurve {
    /// Build from raw rates, computing the cumulative integral.
    pub fn new(t: Vec<f64>, h_na: Vec<f64>, h_na_se: Vec<f64>, activity: Vec<f64>, n_samples: usize) -> Result<Self> {
        check_grid(&t)?;
        let n = t.len();
        if h_na.len() != n || h_na_se.len() != n || activity.len() != n {
            return Err(Error::InvalidCurve("column lengths differ".into()));
        }
        if h_na.iter().chain(&h_na_se).chain(&activity).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("non-finite rate".into()));
        }
        if activity.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidCurve("negative activity".into()));
        }
        let h_na_cum = cumulative_trapezoid(&t, &clamped(&h_na));
        Ok(EntropyCurve { t, h_na, h_na_se, h_na_cum, activity, h_ad: None, h_tot: None, mobility: None, n_samples })
    }

    pub(crate) fn from_estimates(t: Vec<f64>, points: &[PointEstimate], n: usize) -> Result<Self> {
        EntropyCurve::new(
            t,
            points.iter().map(|p| p.h_na).collect(),
            points.iter().map(|p| p.h_na_se).collect(),
            points.iter().map(|p| p.activity).collect(),
            n,
        )
    }

    /// Exact curve of an enumerable chain, including `h_ad`, `h_tot` and
    /// mobility.
    pub fn exact(chain: &ExactChain, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let rates = chain.rates_on(grid)?;
        let mut curve = EntropyCurve::new(
            grid.to_vec(),
            rates.iter().map(|r| r.h_na).collect(),
            vec![0.0; grid.len()],
            rates.iter().map(|r| r.activity).collect(),
            0,
        )?;
        curve.h_ad = Some(rates.iter().map(|r| r.h_ad.value()).collect());
        curve.h_tot = Some(rates.iter().map(|r| r.h_tot.value()).collect());
        curve.mobility = Some(rates.iter().map(|r| r.mobility).collect());
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Total integrated non-adiabatic entropy.
    pub fn total(&self) -> f64 {
        *self.h_na_cum.last().expect("curve is nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WassersteinMode {
    /// `sqrt(2 M h_tot)`; reversible kernels only.
    MobilityTotal,
    /// `sqrt(A h_tot)`; reversible kernels only.
    ActivityTotal,
    /// `sqrt(A h_na)`.
    ActivityNonadiabatic,
}

impl WassersteinMode {
    pub fn name(&self) -> &'static str {
        match self {
            WassersteinMode::MobilityTotal => "mobility-total",
            WassersteinMode::ActivityTotal => "activity-total",
            WassersteinMode::ActivityNonadiabatic => "activity-nonadiabatic",
        }
    }
}

impl std::str::FromStr for WassersteinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobility-total" => Ok(WassersteinMode::MobilityTotal),
            "activity-total" => Ok(WassersteinMode::ActivityTotal),
            "activity-nonadiabatic" => Ok(WassersteinMode::ActivityNonadiabatic),
            other => Err(Error::config(format!("unknown Wasserstein mode {other:?}"))),
        }
    }
}

/// Instantaneous speed-limit rate and its cumulative integral.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinCurve {
    pub t: Vec<f64>,
    pub rate: Vec<f64>,
    pub cum: Vec<f64>,
}

impl WassersteinCurve {
    pub fn from_rate(t: Vec<f64>, rate: Vec<f64>) -> Result<Self> {
        check_grid(&t)?;
        if rate.len() != t.len() {
            return Err(Error::InvalidCurve("column lengths differ".into()));
        }
        if rate.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidCurve("Wasserstein rate must be finite and >= 0".into()));
        }
        let cum = cumulative_trapezoid(&t, &rate);
        Ok(WassersteinCurve { t, rate, cum })
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().expect("curve is nonempty")
    }
}

fn finite_total(h_tot: &Option<Vec<f64>>) -> Result<&[f64]> {
    let h = h_tot
        .as_deref()
        .ok_or_else(|| Error::config("curve has no total entropy production; use activity-nonadiabatic"))?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(
            "total entropy production diverges for this kernel; use activity-nonadiabatic",
        ));
    }
    Ok(h)
}

/// Wasserstein speed-limit curve from an entropy curve.
pub fn wasserstein_bound(entropy: &EntropyCurve, mode: WassersteinMode) -> Result<WassersteinCurve> {
    let a = &entropy.activity;
    let rate: Vec<f64> = match mode {
        WassersteinMode::ActivityNonadiabatic => {
            a.iter().zip(&entropy.h_na).map(|(a, h)| (a.max(0.0) * h.max(0.0)).sqrt()).collect()
        }
        WassersteinMode::ActivityTotal => {
            let h = finite_total(&entropy.h_tot)?;
            a.iter().zip(h).map(|(a, h)| (a.max(0.0) * h.max(0.0)).sqrt()).collect()
        }
        WassersteinMode::MobilityTotal => {
            let h = finite_total(&entropy.h_tot)?;
            let m = entropy.mobility.as_deref().ok_or_else(|| Error::config("curve has no mobility column"))?;
            m.iter().zip(h).map(|(m, h)| (2.0 * m.max(0.0) * h.max(0.0)).sqrt()).collect()
        }
    };
    WassersteinCurve::from_rate(entropy.t.clone(), rate)
}

pub const CURVES_HEADER: &str = "t,h_na,h_na_se,h_na_cum,activity,w_rate,w_cum";

/// Curves CSV with 17-significant-digit floats; `h_ad` and `h_tot` columns
/// are appended when present.
pub fn curves_to_csv(entropy: &EntropyCurve, wass: &WassersteinCurve) -> Result<String> {
    if wass.t != entropy.t {
        return Err(Error::InvalidCurve("entropy and Wasserstein grids differ".into()));
    }
    let extra = entropy.h_ad.as_ref().zip(entropy.h_tot.as_ref());
    let mut out = String::from(CURVES_HEADER);
    if extra.is_some() {
        out.push_str(",h_ad,h_tot");
    }
    out.push('\n');
    for k in 0..entropy.len() {
        let cols = [
            entropy.t[k],
            entropy.h_na[k],
            entropy.h_na_se[k],
            entropy.h_na_cum[k],
            entropy.activity[k],
            wass.rate[k],
            wass.cum[k],
        ];
        let mut line: Vec<String> = cols.iter().map(|&v| fmt17(v)).collect();
        if let Some((ad, tot)) = extra {
            line.push(fmt17(ad[k]));
            line.push(fmt17(tot[k]));
        }
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn parse_float(field: &str, line: usize, column: &str) -> Result<f64> {
    match field.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        s => s
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| Error::Parse { line, msg: format!("column {column}: cannot parse {s:?} as a number") }),
    }
}

/// Parse a curves CSV. The stored cumulative columns are checked against
/// the rates they were integrated from.
pub fn curves_from_csv(text: &str) -> Result<(EntropyCurve, WassersteinCurve)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty curve file".into() })?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    let with_extra = match columns.len() {
        7 => false,
        9 => true,
        _ => return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") }),
    };
    let expected: Vec<&str> =
        CURVES_HEADER.split(',').chain(if with_extra { vec!["h_ad", "h_tot"] } else { vec![] }).collect();
    if columns != expected {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut last_line = 1;
    for (line, text) in lines {
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            let v = parse_float(f, line, columns[c])?;
            if c < 7 && !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("column {}: non-finite value", columns[c]) });
            }
            data[c].push(v);
        }
        last_line = line;
    }
    let at = |e: Error| match e {
        Error::InvalidCurve(msg) => Error::Parse { line: last_line, msg },
        other => other,
    };
    let mut entropy =
        EntropyCurve::new(data[0].clone(), data[1].clone(), data[2].clone(), data[4].clone(), 0).map_err(at)?;
    let wass = WassersteinCurve::from_rate(data[0].clone(), data[5].clone()).map_err(at)?;
    for (name, stored, computed) in [("h_na_cum", &data[3], &entropy.h_na_cum), ("w_cum", &data[6], &wass.cum)] {
        let scale = computed.last().copied().unwrap_or(0.0).abs().max(1.0);
        if let Some(k) = stored.iter().zip(computed).position(|(a, b)| (a - b).abs() > 1e-9 * scale) {
            return Err(Error::Parse {
                line: k + 2,
                msg: format!("{name} is inconsistent with the rate column"),
            });
        }
    }
    if with_extra {
        entropy.h_ad = Some(data[7].clone());
        entropy.h_tot = Some(data[8].clone());
    }
    Ok((entropy, wass))
}
