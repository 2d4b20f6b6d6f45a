use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluate::roc::{check_inputs, curve_from_counts, descending_order, roc_auc};
use crate::stats::percentile;

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// How each resample is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapScheme {
    /// `n` indices with replacement; single-class draws are redrawn.
    #[default]
    WithReplacement,
    /// Every resample is the full set once. Only useful as a degenerate check.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub auc: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub resample_aucs: Vec<f64>,
    pub seed: u64,
    /// Draws rejected because they lacked one class.
    pub redraws: u64,
}

/// Per-resample RNG: stream `index` of the seed, independent of scheduling.
fn resample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Percentile bootstrap 95% interval of the AUC.
pub fn bootstrap_ci(scores: &[f64], labels: &[bool], n_resamples: usize, seed: u64) -> Result<BootstrapResult> {
    bootstrap_ci_with(scores, labels, n_resamples, seed, BootstrapScheme::WithReplacement)
}

pub fn bootstrap_ci_with(
    scores: &[f64],
    labels: &[bool],
    n_resamples: usize,
    seed: u64,
    scheme: BootstrapScheme,
) -> Result<BootstrapResult> {
    let (_, auc) = roc_auc(scores, labels)?;
    let order = descending_order(scores);
    let n = scores.len();
    let draws: Vec<(f64, u64)> = (0..n_resamples)
        .into_par_iter()
        .map(|b| match scheme {
            BootstrapScheme::Identity => (auc, 0),
            BootstrapScheme::WithReplacement => {
                let mut rng = resample_rng(seed, b);
                let mut counts = vec![0u64; n];
                let mut redraws = 0;
                loop {
                    counts.iter_mut().for_each(|c| *c = 0);
                    let mut pos = 0u64;
                    for _ in 0..n {
                        let i = rng.random_range(0..n);
                        counts[i] += 1;
                        pos += labels[i] as u64;
                    }
                    let neg = n as u64 - pos;
                    if pos > 0 && neg > 0 {
                        let c = curve_from_counts(scores, labels, &order, |i| counts[i], pos, neg);
                        return (c.auc(), redraws);
                    }
                    redraws += 1;
                }
            }
        })
        .collect();
    let resample_aucs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let redraws = draws.iter().map(|d| d.1).sum();
    let (ci_lo, ci_hi) = if resample_aucs.is_empty() {
        (auc, auc)
    } else {
        (percentile(&resample_aucs, 2.5), percentile(&resample_aucs, 97.5))
    };
    Ok(BootstrapResult { auc, ci_lo, ci_hi, resample_aucs, seed, redraws })
}

/// Pointwise 95% band of sensitivity over a uniform false-positive-rate grid
/// of `grid + 1` points, from bootstrap resamples of the same streams.
/// Returns `(fpr, lo, hi)`.
pub fn bootstrap_roc_band(
    scores: &[f64],
    labels: &[bool],
    n_resamples: usize,
    seed: u64,
    grid: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    check_inputs(scores, labels)?;
    let order = descending_order(scores);
    let n = scores.len();
    let fprs: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    let rows: Vec<Vec<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = resample_rng(seed, b);
            let mut counts = vec![0u64; n];
            loop {
                counts.iter_mut().for_each(|c| *c = 0);
                let mut pos = 0u64;
                for _ in 0..n {
                    let i = rng.random_range(0..n);
                    counts[i] += 1;
                    pos += labels[i] as u64;
                }
                let neg = n as u64 - pos;
                if pos > 0 && neg > 0 {
                    let c = curve_from_counts(scores, labels, &order, |i| counts[i], pos, neg);
                    return fprs.iter().map(|&f| sensitivity_at_fpr(&c.points, f)).collect();
                }
            }
        })
        .collect();
    Ok(fprs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            (f, percentile(&col, 2.5), percentile(&col, 97.5))
        })
        .collect())
}

/// Linear interpolation of the ROC staircase-with-diagonals at `fpr`.
fn sensitivity_at_fpr(points: &[crate::evaluate::roc::RocPoint], fpr: f64) -> f64 {
    let x = |p: &crate::evaluate::roc::RocPoint| 1.0 - p.specificity;
    let mut best = 0.0f64;
    for w in points.windows(2) {
        let (x0, x1) = (x(&w[0]), x(&w[1]));
        if fpr >= x0 && fpr <= x1 {
            let v = if x1 > x0 {
                w[0].sensitivity + (w[1].sensitivity - w[0].sensitivity) * (fpr - x0) / (x1 - x0)
            } else {
                w[1].sensitivity
            };
            best = best.max(v);
        }
    }
    best
}
