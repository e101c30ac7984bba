//! Datasets, evaluation metrics and the desk-scale experiment harnesses.

mod data;
mod harness;
mod metrics;

pub use data::{binomial_pmf, gen_countdown, sample_distribution, CountdownSpec};
pub use metrics::{
    hellinger, per_sequence_violation, reports_to_csv, rule_violation_rate, total_variation, MetricReport,
    REPORT_HEADER,
};
pub use harness::{
    compare_to_uniform, run_binomial_experiment, run_countdown_experiment, stage_seed, train_network,
    BinomialConfig, BinomialResult, Comparison, CountdownConfig, CountdownResult, CurvePair, Manifest, NetworkConfig,
};
