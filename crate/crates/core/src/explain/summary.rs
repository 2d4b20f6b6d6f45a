use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::mann_whitney_u;
use crate::explain::shapley::Estimator;

/// Per-feature attribution of one window's positive-class probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub id: String,
    pub label: Option<bool>,
    pub base_value: f64,
    pub prediction: f64,
    pub phi: Vec<f64>,
    pub estimator: Estimator,
}

impl Attribution {
    /// `base_value + sum(phi) - prediction`.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs: f64,
    pub mean: f64,
    /// Mean among windows predicted positive / negative; NaN when a group is empty.
    pub mean_predicted_pos: f64,
    pub mean_predicted_neg: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn check_widths(features: &[String], attrs: &[Attribution]) -> Result<()> {
    if attrs.is_empty() {
        return Err(Error::Invalid("no attributions".into()));
    }
    if let Some(a) = attrs.iter().find(|a| a.phi.len() != features.len()) {
        return Err(Error::Shape(format!("attribution {} has {} values for {} features", a.id, a.phi.len(), features.len())));
    }
    Ok(())
}

/// Features ranked by mean |phi| (descending; ties keep catalog order).
/// A window counts as predicted positive when its prediction is `>= threshold`.
pub fn global_importance(features: &[String], attrs: &[Attribution], threshold: f64) -> Result<Vec<FeatureImportance>> {
    check_widths(features, attrs)?;
    let mut rows: Vec<FeatureImportance> = features
        .iter()
        .enumerate()
        .map(|(j, f)| FeatureImportance {
            feature: f.clone(),
            mean_abs: mean_of(attrs.iter().map(|a| a.phi[j].abs())),
            mean: mean_of(attrs.iter().map(|a| a.phi[j])),
            mean_predicted_pos: mean_of(attrs.iter().filter(|a| a.prediction >= threshold).map(|a| a.phi[j])),
            mean_predicted_neg: mean_of(attrs.iter().filter(|a| a.prediction < threshold).map(|a| a.phi[j])),
        })
        .collect();
    rows.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDifference {
    pub feature: String,
    pub mean_pos: f64,
    pub mean_neg: f64,
    pub u: f64,
    pub p: f64,
}

/// Mann-Whitney comparison of each feature's attributions between windows
/// labeled positive and negative. `U` is that of the positive group.
pub fn group_difference(features: &[String], attrs: &[Attribution], labels: &[bool]) -> Result<Vec<GroupDifference>> {
    check_widths(features, attrs)?;
    if labels.len() != attrs.len() {
        return Err(Error::Shape(format!("{} labels for {} attributions", labels.len(), attrs.len())));
    }
    let npos = labels.iter().filter(|&&l| l).count();
    if npos == 0 || npos == labels.len() {
        return Err(Error::SingleClass("group difference needs both label groups".into()));
    }
    features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let pos: Vec<f64> = attrs.iter().zip(labels).filter(|(_, &l)| l).map(|(a, _)| a.phi[j]).collect();
            let neg: Vec<f64> = attrs.iter().zip(labels).filter(|(_, &l)| !l).map(|(a, _)| a.phi[j]).collect();
            let mw = mann_whitney_u(&pos, &neg)?;
            Ok(GroupDifference {
                feature: f.clone(),
                mean_pos: mean_of(pos.iter().copied()),
                mean_neg: mean_of(neg.iter().copied()),
                u: mw.u,
                p: mw.p,
            })
        })
        .collect()
}

/// Mean attribution vector over a group.
pub fn mean_attribution(attrs: &[&Attribution]) -> Result<Vec<f64>> {
    let first = attrs.first().ok_or_else(|| Error::Invalid("empty comparison group".into()))?;
    let f = first.phi.len();
    Ok((0..f).map(|j| mean_of(attrs.iter().map(|a| a.phi[j]))).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRow {
    pub feature: String,
    pub phi: f64,
    pub group_mean: f64,
    /// The sample's attribution pushes the same way as the group mean.
    pub agrees: bool,
}

pub fn local_report(features: &[String], attr: &Attribution, comparison: &[f64]) -> Result<Vec<LocalRow>> {
    if attr.phi.len() != features.len() || comparison.len() != features.len() {
        return Err(Error::Shape("local report widths differ".into()));
    }
    Ok(features
        .iter()
        .zip(attr.phi.iter().zip(comparison))
        .map(|(f, (&phi, &m))| LocalRow { feature: f.clone(), phi, group_mean: m, agrees: phi * m > 0.0 || phi == m })
        .collect())
}
