use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ROC vertex: predicting positive for every score `>= threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub tp: u64,
    pub fp: u64,
}

/// ROC curve ordered by decreasing threshold. The first point has an
/// infinite threshold (nothing predicted positive); the last one sits at the
/// smallest score (everything predicted positive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: u64,
    pub negatives: u64,
}

impl RocCurve {
    /// Trapezoidal area, evaluated from integer counts so that it equals
    /// `(2 * concordant + tied) / (2 * P * N)` bit for bit.
    pub fn auc(&self) -> f64 {
        let mut twice_area: u128 = 0;
        for w in self.points.windows(2) {
            let dfp = (w[1].fp - w[0].fp) as u128;
            twice_area += dfp * (w[1].tp + w[0].tp) as u128;
        }
        twice_area as f64 / (2 * self.positives as u128 * self.negatives as u128) as f64
    }
}

pub(crate) fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("{pos} positives and {neg} negatives")));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score; ties keep input order.
pub(crate) fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Builds the curve from per-item multiplicities over a fixed descending
/// order. Bootstrap resamples reuse this with their draw counts.
pub(crate) fn curve_from_counts(
    scores: &[f64],
    labels: &[bool],
    order: &[usize],
    counts: impl Fn(usize) -> u64,
    positives: u64,
    negatives: u64,
) -> RocCurve {
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { threshold: f64::INFINITY, sensitivity: 0.0, specificity: 1.0, tp: 0, fp: 0 });
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut any = false;
        while i < order.len() && scores[order[i]] == s {
            let c = counts(order[i]);
            if c > 0 {
                any = true;
                if labels[order[i]] {
                    tp += c;
                } else {
                    fp += c;
                }
            }
            i += 1;
        }
        if any {
            points.push(RocPoint {
                threshold: s,
                sensitivity: tp as f64 / positives as f64,
                specificity: (negatives - fp) as f64 / negatives as f64,
                tp,
                fp,
            });
        }
    }
    RocCurve { points, positives, negatives }
}

/// ROC curve and its area. Fails unless both classes are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let order = descending_order(scores);
    let curve = curve_from_counts(scores, labels, &order, |_| 1, pos, neg);
    let auc = curve.auc();
    Ok((curve, auc))
}

/// Threshold chosen for a target sensitivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Highest threshold whose sensitivity reaches `target`.
pub fn operating_point(curve: &RocCurve, target_sensitivity: f64) -> Result<OperatingPoint> {
    let p = curve
        .points
        .iter()
        .find(|p| p.sensitivity >= target_sensitivity)
        .or(curve.points.last())
        .ok_or_else(|| Error::Invalid("empty ROC curve".into()))?;
    Ok(OperatingPoint { threshold: p.threshold, sensitivity: p.sensitivity, specificity: p.specificity })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Fixed-threshold classification quality. Rates with an empty denominator are NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub counts: ConfusionCounts,
}

/// Scores `>= threshold` count as positive predictions.
pub fn confusion_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let mut c = ConfusionCounts { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(Confusion {
        threshold,
        sensitivity: c.tp as f64 / (c.tp + c.fn_) as f64,
        specificity: c.tn as f64 / (c.tn + c.fp) as f64,
        counts: c,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_and_tied() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap().1, 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &labels).unwrap().1, 0.5);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap().1, 0.0);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass(_))));
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn curve_shape() {
        let (c, _) = roc_auc(&[0.3, 0.3, 0.7, 0.1], &[false, true, true, false]).unwrap();
        let bounds: Vec<_> = c.points.iter().map(|p| (p.threshold, p.tp, p.fp)).collect();
        assert_eq!(bounds, vec![(f64::INFINITY, 0, 0), (0.7, 1, 0), (0.3, 2, 1), (0.1, 2, 2)]);
        let last = c.points.last().unwrap();
        assert_eq!((last.sensitivity, last.specificity), (1.0, 0.0));
    }

    #[test]
    fn twenty_random_pairs_match_concordance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let scores: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let mut labels: Vec<bool> = (0..20).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let auc = roc_auc(&scores, &labels).unwrap().1;
        assert!((auc - oracle::concordance(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn operating_point_hand_curve() {
        // Ten points, 5 positives: scores descending with labels interleaved.
        let scores = [0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let labels = [true, true, false, true, false, true, false, false, true, false];
        let (c, _) = roc_auc(&scores, &labels).unwrap();
        for target in [0.0, 0.2, 0.5, 0.8, 0.9, 1.0] {
            let op = operating_point(&c, target).unwrap();
            // Exhaustive scan: largest candidate threshold meeting the target.
            let best = scores
                .iter()
                .copied()
                .filter(|&t| confusion_at_threshold(&scores, &labels, t).unwrap().sensitivity >= target)
                .fold(f64::NEG_INFINITY, f64::max);
            if target == 0.0 {
                assert_eq!(op.threshold, f64::INFINITY);
            } else {
                assert_eq!(op.threshold, best);
            }
            let conf = confusion_at_threshold(&scores, &labels, op.threshold).unwrap();
            assert_eq!((conf.sensitivity, conf.specificity), (op.sensitivity, op.specificity));
        }
        let perfect = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap().0;
        assert_eq!(operating_point(&perfect, 0.9).unwrap().specificity, 1.0);
    }

    #[test]
    fn confusion_edges() {
        let scores = [0.1, 0.4, 0.6, 0.9];
        let labels = [false, true, false, true];
        assert_eq!(confusion_at_threshold(&scores, &labels, 0.0).unwrap().sensitivity, 1.0);
        let c = confusion_at_threshold(&scores, &labels, 1.5).unwrap();
        assert_eq!((c.sensitivity, c.specificity), (0.0, 1.0));
        let c = confusion_at_threshold(&scores, &labels, 0.6).unwrap();
        assert_eq!(c.counts, ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 });
    }

    #[test]
    fn random_thirty_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        let scores: Vec<f64> = (0..30).map(|_| (rng.random::<f64>() * 10.0).round() / 10.0).collect();
        let labels: Vec<bool> = (0..30).map(|_| rng.random_bool(0.5)).collect();
        for t in [0.0, 0.25, 0.5, 0.7, 1.0] {
            let c = confusion_at_threshold(&scores, &labels, t).unwrap().counts;
            let tp = (0..30).filter(|&i| labels[i] && scores[i] >= t).count() as u64;
            let fp = (0..30).filter(|&i| !labels[i] && scores[i] >= t).count() as u64;
            let p = labels.iter().filter(|&&l| l).count() as u64;
            assert_eq!(c, ConfusionCounts { tp, fp, tn: 30 - p - fp, fn_: p - tp });
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 7.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(s, mut l)| {
                    l[0] = true;
                    l[1] = false;
                    (s, l)
                })
        })
    }

    proptest! {
        #[test]
        fn trapezoid_equals_concordance((s, l) in instance()) {
            let auc = roc_auc(&s, &l).unwrap().1;
            prop_assert!((auc - oracle::concordance(&s, &l)).abs() <= 1e-12);
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((roc_auc(&neg, &l).unwrap().1 - (1.0 - auc)).abs() <= 1e-12);
            let mono: Vec<f64> = s.iter().map(|v| (3.0 * v).exp()).collect();
            prop_assert_eq!(roc_auc(&mono, &l).unwrap().1, auc);
        }

        #[test]
        fn sensitivity_non_decreasing((s, l) in instance()) {
            let (c, _) = roc_auc(&s, &l).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].sensitivity >= w[0].sensitivity);
                prop_assert!(w[1].specificity <= w[0].specificity);
            }
            let mut distinct = s.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assert_eq!(c.points.len(), distinct.len() + 1);
        }
    }
}
