//! Outlier removal, three-tier imputation, min-max normalization, window
//! extraction and year-based splitting.
//!
//! [`preprocess_tables`] runs the stages in their fixed order:
//! clip (hydro only) → forward fill → neighbor-region fill → kNN → normalize.

pub mod clip;
pub mod fill;
pub mod knn;
pub mod normalize;
pub mod windows;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clip::clip_outliers;
pub use fill::{forward_fill, neighbor_region_fill, regions_missing_feature};
pub use knn::{knn_impute_table, KnnImputer};
pub use normalize::{apply_normalize_tables, fit_normalize, NormalizationBounds};
pub use windows::{build_windows, split_by_year, DatasetSplit, FeatureWindow, SplitKind, SplitYears, WindowReport, WINDOW_DAYS};

use crate::error::{Error, Result};
use crate::ingest::catalog::{FeatureCatalog, ImputationPolicy, Source};
use crate::ingest::samples::Region;
use crate::ingest::table::TimeSeriesTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub ffill_max_gap_days: usize,
    pub knn_k: usize,
    /// Scale kNN distances by each column's standard deviation.
    pub knn_standardize: bool,
    pub split: SplitYears,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            clip_lo: 2.5,
            clip_hi: 97.5,
            ffill_max_gap_days: 30,
            knn_k: 7,
            knn_standardize: false,
            split: SplitYears::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub clipped_cells: usize,
    pub forward_filled_cells: usize,
    /// (region, feature) pairs filled from neighboring regions.
    pub neighbor_filled: Vec<(Region, String)>,
    pub neighbor_filled_cells: usize,
    pub knn_filled_cells: usize,
}

#[derive(Clone, Debug)]
pub struct Preprocessed {
    /// Complete, normalized tables.
    pub tables: BTreeMap<Region, TimeSeriesTable>,
    /// Complete tables before normalization.
    pub imputed: BTreeMap<Region, TimeSeriesTable>,
    pub bounds: NormalizationBounds,
    pub report: PreprocessReport,
}

fn missing(tables: &BTreeMap<Region, TimeSeriesTable>) -> usize {
    tables.values().map(TimeSeriesTable::missing_count).sum()
}

/// Runs the full preprocessing chain on full-catalog region tables.
pub fn preprocess_tables(
    tables: &BTreeMap<Region, TimeSeriesTable>,
    catalog: &FeatureCatalog,
    adjacency: &BTreeMap<Region, Vec<Region>>,
    cfg: &PreprocessConfig,
) -> Result<Preprocessed> {
    let names = catalog.names();
    for (r, t) in tables {
        if t.features() != names.as_slice() {
            return Err(Error::Shape(format!("table for {r} is not in catalog order")));
        }
    }
    let mut report = PreprocessReport::default();

    let before = missing(tables);
    let mut current: BTreeMap<Region, TimeSeriesTable> = tables
        .iter()
        .map(|(r, t)| {
            let (clipped, skipped) = clip_outliers(t, catalog, cfg.clip_lo, cfg.clip_hi);
            for f in skipped {
                log::debug!("clip: {r}/{f} has fewer than two values");
            }
            (*r, clipped)
        })
        .collect();
    let after_clip = missing(&current);
    report.clipped_cells = after_clip - before;

    for t in current.values_mut() {
        for (j, d) in catalog.features().iter().enumerate() {
            if d.imputation_policy == ImputationPolicy::ForwardFill {
                *t = forward_fill(t, j, cfg.ffill_max_gap_days);
            }
        }
    }
    let after_ffill = missing(&current);
    report.forward_filled_cells = after_clip - after_ffill;

    for d in catalog.features() {
        if d.source == Source::Derived {
            continue;
        }
        let targets = regions_missing_feature(&current, &d.name);
        if targets.is_empty() || targets.len() == current.len() {
            continue;
        }
        current = neighbor_region_fill(&current, adjacency, &d.name, &targets)?;
        report.neighbor_filled.extend(targets.into_iter().map(|r| (r, d.name.clone())));
    }
    let after_neighbor = missing(&current);
    report.neighbor_filled_cells = after_ffill - after_neighbor;

    let imputed: BTreeMap<Region, TimeSeriesTable> = current
        .par_iter()
        .map(|(r, t)| {
            let imputer = if cfg.knn_standardize {
                KnnImputer::standardized(cfg.knn_k, t.values())
            } else {
                KnnImputer::new(cfg.knn_k)
            };
            knn_impute_table(t, &imputer).map(|t| (*r, t))
        })
        .collect::<Result<_>>()?;
    report.knn_filled_cells = after_neighbor;

    let split = cfg.split;
    let bounds = fit_normalize(imputed.values(), |d| split.is_train(d))?;
    let normalized = apply_normalize_tables(&imputed, &bounds)?;
    Ok(Preprocessed {
        tables: normalized,
        imputed,
        bounds,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use ndarray::Array2;

    fn tables() -> (FeatureCatalog, BTreeMap<Region, TimeSeriesTable>) {
        let catalog = FeatureCatalog::subset(&["mean_temperature", "oxygen_concentration", "chloride"]).unwrap();
        let start = NaiveDate::from_ymd_opt(2021, 11, 1).unwrap();
        let n = 120;
        let mk = |r: Region, offset: f64, with_chloride: bool| {
            let vals = Array2::from_shape_fn((n, 3), |(d, j)| match j {
                0 => Some(10.0 + (d as f64 * 0.1).sin()),
                1 => (d % 20 == 0).then_some(8.0 + offset),
                _ => (with_chloride && d % 3 != 1).then_some(15.0 + offset + (d % 7) as f64),
            });
            TimeSeriesTable::new(Some(r), start, catalog.names(), vals).unwrap()
        };
        let t = BTreeMap::from([
            (Region::ESE, mk(Region::ESE, 0.0, true)),
            (Region::ESN, mk(Region::ESN, 1.0, true)),
            (Region::ESM, mk(Region::ESM, 2.0, false)),
        ]);
        (catalog, t)
    }

    #[test]
    fn pipeline_completes_every_cell() {
        let (catalog, t) = tables();
        let cfg = PreprocessConfig::default();
        let out = preprocess_tables(&t, &catalog, &crate::ingest::regions::default_neighbors(), &cfg).unwrap();
        assert!(out.tables.values().all(|t| t.missing_count() == 0));
        assert_eq!(out.report.neighbor_filled, vec![(Region::ESM, "chloride".to_string())]);
        assert!(out.report.forward_filled_cells > 0);
        // Training-year rows normalize into [0, 1].
        for t in out.tables.values() {
            for d in 0..t.n_days() {
                if cfg.split.is_train(t.date(d)) {
                    assert!(t.values().row(d).iter().all(|v| (0.0..=1.0).contains(&v.unwrap())));
                }
            }
        }
    }

    #[test]
    fn rerun_on_complete_data_is_a_no_op_after_clip() {
        let (catalog, t) = tables();
        let adj = crate::ingest::regions::default_neighbors();
        let cfg = PreprocessConfig { clip_lo: 0.0, clip_hi: 100.0, ..Default::default() };
        let once = preprocess_tables(&t, &catalog, &adj, &cfg).unwrap();
        let twice = preprocess_tables(&once.imputed, &catalog, &adj, &cfg).unwrap();
        assert_eq!(once.imputed, twice.imputed);
        assert_eq!(once.bounds, twice.bounds);
        assert_eq!(twice.report.knn_filled_cells, 0);
    }
}
