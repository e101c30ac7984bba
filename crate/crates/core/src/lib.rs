//! Thermodynamic analysis of discrete-diffusion reverse processes and the
//! sampling schedules built from it.
//!
//! - [`ctmc`]: rate kernels, noise schedules, exact forward marginals.
//! - [`score`]: probability-ratio models (exact oracle, small MLP) and the
//!   denoising score-entropy objective.
//! - [`thermo`]: entropy production, dynamical activity, mobility and
//!   Wasserstein speed-limit curves.
//! - [`scheduler`]: uniform, entropic (EDS) and Wasserstein (WDS) time grids.
//! - [`sampler`]: Euler tau-leaping over any schedule.
//! - [`experiments`]: datasets, metrics and the binomial/countdown harnesses.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {:e})", a, b, $tol);
    }};
}

pub mod ctmc;
pub mod error;
pub mod experiments;
pub mod io;
pub mod rng;
pub mod sampler;
pub mod scheduler;
pub mod score;
pub mod thermo;

pub use error::{Error, Result};
