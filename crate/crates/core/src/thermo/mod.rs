//! Entropy production, dynamical activity, mobility and Wasserstein
//! speed-limit curves of the reverse process.
//!
//! Sign convention: `h_na` is the relaxation (non-adiabatic) rate, which
//! equals `−d/dt KL(p_t ‖ π)` along the forward noise axis and is therefore
//! non-negative. `h_ad` vanishes for the uniform kernel and diverges for the
//! absorbing one, where `h_na` replaces the divergent stationary-distribution
//! ratio of each unmasking edge by the total unmasking odds.

mod curve;
mod estimate;
mod exact;

pub use curve::{
    cumulative_trapezoid, curves_from_csv, curves_to_csv, wasserstein_bound, EntropyCurve, WassersteinCurve,
    WassersteinMode, CURVES_HEADER,
};
pub use estimate::{
    corrupted_batch, h_na_estimate, sample_contributions, sweep_curves, time_grid, DataSource, PointEstimate,
};
pub use exact::{
    activity_exact, activity_from_generator, exact_rates, h_ad_exact, h_na_exact, h_tot_exact, log_mean,
    mobility_exact, mobility_from_generator, ExactChain, ExactRates, Rate,
};
