use serde::{Deserialize, Serialize};

use crate::ctmc::Distribution;
use crate::error::{Error, Result};

/// Fraction of adjacent pairs `(a, b)` breaking the countdown rule. A pair is
/// valid when `a == 0` (free reset) or `b == a - 1`; tokens outside the
/// vocabulary always violate.
pub fn rule_violation_rate(sequences: &[Vec<usize>], vocab: usize) -> f64 {
    let (violations, pairs) = rule_violation_counts(sequences, vocab);
    if pairs == 0 {
        0.0
    } else {
        violations as f64 / pairs as f64
    }
}

pub(crate) fn rule_violation_counts(sequences: &[Vec<usize>], vocab: usize) -> (usize, usize) {
    let mut violations = 0;
    let mut pairs = 0;
    for seq in sequences {
        for w in seq.windows(2) {
            pairs += 1;
            let (a, b) = (w[0], w[1]);
            let valid = a < vocab && b < vocab && (a == 0 || b + 1 == a);
            if !valid {
                violations += 1;
            }
        }
    }
    (violations, pairs)
}

/// Per-sequence violation rates, for standard errors over sequences.
pub fn per_sequence_violation(sequences: &[Vec<usize>], vocab: usize) -> Vec<f64> {
    sequences.iter().map(|s| rule_violation_rate(std::slice::from_ref(s), vocab)).collect()
}

fn same_support(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!("support sizes {} and {} differ", p.len(), q.len())));
    }
    Ok(())
}

pub fn total_variation(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_support(p, q)?;
    let tv = 0.5 * p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(tv.clamp(0.0, 1.0))
}

pub fn hellinger(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_support(p, q)?;
    let bc: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((1.0 - bc).max(0.0).sqrt().min(1.0))
}

/// One row of an evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MetricReport {
    /// Mean and standard error of per-unit values.
    pub fn from_samples(strategy: &str, k: usize, metric: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        let stderr = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
        };
        MetricReport { strategy: strategy.into(), k, metric: metric.into(), value: mean, stderr, n }
    }
}

pub const REPORT_HEADER: &str = "strategy,K,metric,value,stderr,n";

/// Report rows as CSV with 17-significant-digit floats.
pub fn reports_to_csv(rows: &[MetricReport]) -> String {
    use crate::io::fmt17;
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.strategy, r.k, r.metric, fmt17(r.value), fmt17(r.stderr), r.n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rule_violation_examples() {
        assert_eq!(rule_violation_rate(&[vec![5, 4, 3, 2, 1, 0, 17, 16]], 32), 0.0);
        assert_close!(rule_violation_rate(&[vec![5, 4, 7, 6]], 32), 1.0 / 3.0, 1e-15);
        assert_eq!(rule_violation_rate(&[vec![3; 10]], 32), 1.0);
        assert_eq!(rule_violation_rate(&[vec![1, 32]], 32), 1.0);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(total_variation(&d(&[0.3, 0.7]), &d(&[0.3, 0.7])).unwrap(), 0.0);
        assert_eq!(total_variation(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 1.0);
        assert_close!(total_variation(&d(&[0.75, 0.25]), &d(&[0.5, 0.5])).unwrap(), 0.25, 1e-15);
        assert_eq!(hellinger(&d(&[0.2, 0.8]), &d(&[0.2, 0.8])).unwrap(), 0.0);
        assert_close!(hellinger(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 1.0, 1e-15);
        assert_close!(hellinger(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(), 0.54120, 1e-5);
        assert!(hellinger(&d(&[1.0]), &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn report_csv() {
        let r = MetricReport::from_samples("eds", 8, "rule_violation", &[0.0, 1.0]);
        assert_close!(r.stderr, 0.5, 1e-15);
        let csv = reports_to_csv(&[r]);
        assert_eq!(csv, "strategy,K,metric,value,stderr,n\neds,8,rule_violation,5.0000000000000000e-1,5.0000000000000000e-1,2\n");
    }
}
