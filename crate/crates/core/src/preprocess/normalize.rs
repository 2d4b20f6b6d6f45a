use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::samples::Region;
use crate::ingest::table::TimeSeriesTable;

/// Per-feature min-max bounds, in catalog order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub features: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationBounds {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// SHA-256 over feature names and the bit patterns of the bounds.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for ((f, lo), hi) in self.features.iter().zip(&self.min).zip(&self.max) {
            h.update(f.as_bytes());
            h.update(b"|");
            h.update(lo.to_bits().to_le_bytes());
            h.update(hi.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (x - self.min[j]) / range
        } else {
            0.0
        }
    }

    /// Applies the bounds column-wise to a days x F matrix; values are not clipped.
    pub fn apply(&self, matrix: &Array2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.len() {
            return Err(Error::Shape(format!("matrix has {} columns, bounds {}", matrix.ncols(), self.len())));
        }
        let mut out = matrix.clone();
        for ((_, j), v) in out.indexed_iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("normalizing {}", self.features[j])));
            }
            *v = self.scale(j, *v);
        }
        Ok(out)
    }
}

/// Fits bounds over every observed cell of the rows whose date satisfies `in_train`.
pub fn fit_normalize<'a, I, P>(tables: I, in_train: P) -> Result<NormalizationBounds>
where
    I: IntoIterator<Item = &'a TimeSeriesTable>,
    P: Fn(chrono::NaiveDate) -> bool,
{
    let mut features: Option<Vec<String>> = None;
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for t in tables {
        match &features {
            None => {
                features = Some(t.features().to_vec());
                lo = vec![f64::INFINITY; t.features().len()];
                hi = vec![f64::NEG_INFINITY; t.features().len()];
            }
            Some(f) if f.as_slice() != t.features() => {
                return Err(Error::Shape("tables disagree on feature order".into()));
            }
            Some(_) => {}
        }
        for d in 0..t.n_days() {
            if !in_train(t.date(d)) {
                continue;
            }
            for (j, v) in t.values().row(d).iter().enumerate() {
                if let Some(v) = v {
                    lo[j] = lo[j].min(*v);
                    hi[j] = hi[j].max(*v);
                }
            }
        }
    }
    let features = features.ok_or_else(|| Error::Invalid("no tables to fit normalization on".into()))?;
    for (j, f) in features.iter().enumerate() {
        if !lo[j].is_finite() || !hi[j].is_finite() {
            return Err(Error::Invalid(format!("feature {f} has no training-period values")));
        }
    }
    Ok(NormalizationBounds { features, min: lo, max: hi })
}

/// Normalizes complete tables (missing cells stay missing).
pub fn apply_normalize_tables(
    tables: &BTreeMap<Region, TimeSeriesTable>,
    bounds: &NormalizationBounds,
) -> Result<BTreeMap<Region, TimeSeriesTable>> {
    tables
        .iter()
        .map(|(r, t)| {
            if t.features() != bounds.features.as_slice() {
                return Err(Error::Shape(format!("table for {r} does not match the bounds' features")));
            }
            let values = t
                .values()
                .indexed_iter()
                .map(|((_, j), v)| v.map(|x| bounds.scale(j, x)))
                .collect::<Vec<_>>();
            let values = Array2::from_shape_vec(t.values().dim(), values).unwrap();
            Ok((*r, TimeSeriesTable::new(t.region, t.start(), t.features().to_vec(), values)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Datelike, NaiveDate};

    fn bounds(lo: f64, hi: f64) -> NormalizationBounds {
        NormalizationBounds { features: vec!["x".into()], min: vec![lo], max: vec![hi] }
    }

    #[test]
    fn affine_map_and_extrapolation() {
        let b = bounds(2.0, 6.0);
        let m = Array2::from_shape_vec((4, 1), vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(b.apply(&m).unwrap().column(0).to_vec(), vec![0.0, 0.5, 1.0, 1.5]);
        let c = bounds(3.0, 3.0);
        assert!(c.apply(&Array2::from_elem((3, 1), 3.0)).unwrap().iter().all(|&v| v == 0.0));
        assert!(b.apply(&Array2::from_elem((1, 1), f64::NAN)).is_err());
    }

    #[test]
    fn fit_uses_training_rows_only() {
        let start = NaiveDate::from_ymd_opt(2021, 12, 30).unwrap();
        let vals = Array2::from_shape_vec((4, 1), vec![Some(1.0), Some(5.0), Some(100.0), None]).unwrap();
        let t = TimeSeriesTable::new(None, start, vec!["x".into()], vals).unwrap();
        let b = fit_normalize([&t], |d| d.year() <= 2021).unwrap();
        assert_eq!((b.min[0], b.max[0]), (1.0, 5.0));
        assert_eq!(b.hash_hex(), bounds(1.0, 5.0).hash_hex());
        assert_ne!(b.hash_hex(), bounds(1.0, 5.000000001).hash_hex());
    }
}
