//! Long-format hydrological measurements, averaged per region and day.
//!
//! Columns: `station,location,date,feature,value,unit`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::catalog::{FeatureCatalog, Source};
use crate::ingest::regions::{RegionConfig, StationRole};
use crate::ingest::samples::Region;
use crate::ingest::table::TimeSeriesTable;

#[derive(Clone, Debug)]
pub struct HydroData {
    pub tables: BTreeMap<Region, TimeSeriesTable>,
    /// Feature names present in the file but not in the catalog.
    pub ignored_features: Vec<String>,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    sum: f64,
    n: usize,
}

pub fn parse_hydro(path: &Path, stations: &RegionConfig, catalog: &FeatureCatalog) -> Result<HydroData> {
    parse_hydro_files(&[path], stations, catalog)
}

pub fn parse_hydro_files<P: AsRef<Path>>(
    paths: &[P],
    stations: &RegionConfig,
    catalog: &FeatureCatalog,
) -> Result<HydroData> {
    let hydro_features: Vec<String> = catalog
        .features()
        .iter()
        .filter(|f| f.source == Source::Hydro)
        .map(|f| f.name.clone())
        .collect();
    let mut units: BTreeMap<String, String> = BTreeMap::new();
    let mut acc: BTreeMap<(Region, NaiveDate, usize), Acc> = BTreeMap::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    let mut ignored: BTreeSet<String> = BTreeSet::new();
    let (mut first, mut last): (Option<NaiveDate>, Option<NaiveDate>) = (None, None);

    for path in paths {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(Error::csv(path))?;
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(Error::csv(path))?;
            if rec.len() < 6 {
                return Err(Error::parse(path, row, "expected station,location,date,feature,value,unit"));
            }
            let (station, location, date_s, feature, value_s, unit) =
                (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4], &rec[5]);
            let role = stations.station_role(station).or_else(|| stations.station_role(location));
            let region = match role {
                Some(StationRole::Region(r)) => r,
                Some(StationRole::Ignored) => continue,
                None => {
                    unknown.insert(station.to_string());
                    continue;
                }
            };
            let date = NaiveDate::parse_from_str(date_s, "%Y-%m-%d")
                .map_err(|_| Error::parse(path, row, format!("unparsable date {date_s:?}")))?;
            first = Some(first.map_or(date, |f| f.min(date)));
            last = Some(last.map_or(date, |l| l.max(date)));
            let Some(col) = hydro_features.iter().position(|f| f == feature) else {
                ignored.insert(feature.to_string());
                continue;
            };
            match units.get(feature) {
                Some(u) if u != unit => {
                    return Err(Error::ConflictingUnits {
                        feature: feature.to_string(),
                        first: u.clone(),
                        second: unit.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    let expected = &catalog.descriptor(feature).unwrap().units;
                    if expected != unit {
                        return Err(Error::ConflictingUnits {
                            feature: feature.to_string(),
                            first: expected.clone(),
                            second: unit.to_string(),
                        });
                    }
                    units.insert(feature.to_string(), unit.to_string());
                }
            }
            if value_s.is_empty() {
                continue;
            }
            let v: f64 = value_s
                .parse()
                .map_err(|_| Error::parse(path, row, format!("non-numeric value {value_s:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, row, format!("non-finite value {value_s:?}")));
            }
            let a = acc.entry((region, date, col)).or_default();
            a.sum += v;
            a.n += 1;
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownStations(unknown.into_iter().collect()));
    }
    if !ignored.is_empty() {
        log::warn!("hydro: ignored {} feature(s) not in the catalog: {:?}", ignored.len(), ignored);
    }
    let mut tables = BTreeMap::new();
    if let (Some(start), Some(end)) = (first, last) {
        let mut regions: BTreeSet<Region> = stations.stations.values().copied().collect();
        regions.extend(acc.keys().map(|k| k.0));
        for r in regions {
            tables.insert(r, TimeSeriesTable::empty(Some(r), start, end, hydro_features.clone()));
        }
        for ((r, date, col), a) in acc {
            let t = tables.get_mut(&r).unwrap();
            let d = t.day_index(date).unwrap();
            t.values_mut()[[d, col]] = Some(a.sum / a.n as f64);
        }
    }
    Ok(HydroData {
        tables,
        ignored_features: ignored.into_iter().collect(),
    })
}
