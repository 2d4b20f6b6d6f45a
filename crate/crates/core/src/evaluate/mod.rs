//! ROC analysis, bootstrap intervals, operating points and rank tests.

mod bootstrap;
mod mann_whitney;
pub mod report;
mod roc;

pub use bootstrap::{bootstrap_ci, bootstrap_ci_with, bootstrap_roc_band, BootstrapResult, BootstrapScheme, DEFAULT_RESAMPLES};
pub use mann_whitney::{
    mann_whitney_exact, mann_whitney_normal, mann_whitney_u, MannWhitney, PValueMethod, EXACT_MAX_PRODUCT,
    EXACT_MAX_TOTAL,
};
pub use roc::{confusion_at_threshold, operating_point, roc_auc, Confusion, ConfusionCounts, OperatingPoint, RocCurve, RocPoint};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use report::MetricRow;

pub const DEFAULT_TARGET_SENSITIVITY: f64 = 0.90;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub target_sensitivity: f64,
    /// Fixed decision threshold; when absent it is chosen on this set.
    pub threshold: Option<f64>,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { target_sensitivity: DEFAULT_TARGET_SENSITIVITY, threshold: None, n_resamples: DEFAULT_RESAMPLES, seed: 0 }
    }
}

/// Everything reported for one scored set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub positives: usize,
    pub auc: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bootstrap_redraws: u64,
    pub operating_point: OperatingPoint,
    pub confusion: Confusion,
    #[serde(skip)]
    pub curve: Option<RocCurve>,
}

pub fn evaluate_scores(scores: &[f64], labels: &[bool], opts: &EvalOptions) -> Result<EvalMetrics> {
    let (curve, auc) = roc_auc(scores, labels)?;
    let boot = bootstrap_ci(scores, labels, opts.n_resamples, opts.seed)?;
    let op = operating_point(&curve, opts.target_sensitivity)?;
    let threshold = opts.threshold.unwrap_or(op.threshold);
    let confusion = confusion_at_threshold(scores, labels, threshold)?;
    Ok(EvalMetrics {
        n: scores.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        auc,
        ci_lo: boot.ci_lo,
        ci_hi: boot.ci_hi,
        bootstrap_redraws: boot.redraws,
        operating_point: op,
        confusion,
        curve: Some(curve),
    })
}

impl EvalMetrics {
    pub fn rows(&self) -> Vec<MetricRow> {
        let c = &self.confusion;
        vec![
            MetricRow::new("n", self.n as f64),
            MetricRow::new("positives", self.positives as f64),
            MetricRow::with_ci("auc", self.auc, self.ci_lo, self.ci_hi),
            MetricRow::new("target_sensitivity_threshold", self.operating_point.threshold),
            MetricRow::new("threshold", c.threshold),
            MetricRow::new("sensitivity", c.sensitivity),
            MetricRow::new("specificity", c.specificity),
            MetricRow::new("tp", c.counts.tp as f64),
            MetricRow::new("fp", c.counts.fp as f64),
            MetricRow::new("tn", c.counts.tn as f64),
            MetricRow::new("fn", c.counts.fn_ as f64),
            MetricRow::new("bootstrap_redraws", self.bootstrap_redraws as f64),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_is_consistent() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 13) % 50) as f64 / 50.0).collect();
        let labels: Vec<bool> = (0..50).map(|i| (i * 13) % 50 > 30 || i % 7 == 0).collect();
        let opts = EvalOptions { n_resamples: 200, seed: 5, ..Default::default() };
        let m = evaluate_scores(&scores, &labels, &opts).unwrap();
        assert_eq!(m.confusion.threshold, m.operating_point.threshold);
        assert_eq!(m.confusion.sensitivity, m.operating_point.sensitivity);
        assert!(m.confusion.sensitivity >= 0.9);
        assert!(m.ci_lo <= m.auc && m.auc <= m.ci_hi);
        let fixed = evaluate_scores(&scores, &labels, &EvalOptions { threshold: Some(0.5), ..opts }).unwrap();
        assert_eq!(fixed.confusion.threshold, 0.5);
        assert_eq!(fixed.rows()[2].ci, Some((m.ci_lo, m.ci_hi)));
    }
}
