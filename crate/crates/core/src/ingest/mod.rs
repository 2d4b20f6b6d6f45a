//! Parsing of meteorological, hydrological and monitoring inputs into
//! canonical per-region daily tables plus deduplicated, labelled samples.

pub mod catalog;
pub mod hydro;
pub mod meteo;
pub mod regions;
pub mod samples;
pub mod solar;
pub mod table;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

pub use catalog::{CatalogHash, FeatureCatalog, FeatureDescriptor, ImputationPolicy, Source};
pub use regions::RegionConfig;
pub use samples::{deduplicate, Concentration, LabelMode, Region, SampleRecord};
pub use solar::{derive_solar, Site, SolarTimes};
pub use table::TimeSeriesTable;

use crate::error::Result;

/// Derived calendar and solar value for `feature` on `date`.
pub fn derived_value(feature: &str, date: NaiveDate, site: Site) -> Result<f64> {
    let solar = || derive_solar(date, site.latitude, site.longitude);
    Ok(match feature {
        "week_number" => f64::from(solar::iso_week(date)),
        "sunrise_hour" => solar()?.sunrise_hour,
        "sunset_hour" => solar()?.sunset_hour,
        "day_length" => solar()?.day_length,
        other => {
            return Err(crate::Error::Config(format!("{other} is not a derived feature")));
        }
    })
}

/// Builds one full-catalog table per region on a shared grid.
///
/// Meteorological columns are shared by every region; hydrological columns
/// come from the region's own table, or stay missing when it has none;
/// derived columns are computed from the date at `site`.
pub fn assemble_region_tables(
    catalog: &FeatureCatalog,
    meteo: &TimeSeriesTable,
    hydro: &BTreeMap<Region, TimeSeriesTable>,
    regions: &BTreeSet<Region>,
    site: Site,
) -> Result<BTreeMap<Region, TimeSeriesTable>> {
    let mut start = meteo.start();
    let mut end = meteo.end();
    for t in hydro.values() {
        start = start.min(t.start());
        end = end.max(t.end());
    }
    let names = catalog.names();
    let meteo_on_grid = meteo.reindexed(start, end, &names);
    let mut derived_cols: Vec<(usize, Vec<f64>)> = Vec::new();
    for j in catalog.indices_by_source(Source::Derived) {
        let mut col = Vec::with_capacity(meteo_on_grid.n_days());
        for d in 0..meteo_on_grid.n_days() {
            col.push(derived_value(&names[j], meteo_on_grid.date(d), site)?);
        }
        derived_cols.push((j, col));
    }
    let hydro_idx = catalog.indices_by_source(Source::Hydro);

    let mut out = BTreeMap::new();
    for &region in regions {
        let mut t = meteo_on_grid.clone();
        t.region = Some(region);
        if let Some(h) = hydro.get(&region) {
            let h = h.reindexed(start, end, &names);
            for &j in &hydro_idx {
                t.values_mut().column_mut(j).assign(&h.values().column(j));
            }
        }
        for (j, col) in &derived_cols {
            for (d, v) in col.iter().enumerate() {
                t.values_mut()[[d, *j]] = Some(*v);
            }
        }
        out.insert(region, t);
    }
    Ok(out)
}
