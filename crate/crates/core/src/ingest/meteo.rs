//! KNMI-style daily station files.
//!
//! Layout: `STN,YYYYMMDD,<code>,<code>,...` with integer cells in the codes'
//! native units (mostly tenths). Everything is converted to SI on read.

use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::catalog::FeatureCatalog;
use crate::ingest::table::TimeSeriesTable;

/// One recognized KNMI column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeteoCode {
    pub code: &'static str,
    pub feature: &'static str,
    /// Raw integer / divisor = SI value.
    pub divisor: f64,
    /// KNMI writes -1 for amounts below 0.05 of the unit.
    pub trace_minus_one: bool,
}

pub const METEO_CODES: [MeteoCode; 9] = [
    MeteoCode { code: "TG", feature: "mean_temperature", divisor: 10.0, trace_minus_one: false },
    MeteoCode { code: "TX", feature: "max_temperature", divisor: 10.0, trace_minus_one: false },
    MeteoCode { code: "TN", feature: "min_temperature", divisor: 10.0, trace_minus_one: false },
    MeteoCode { code: "SQ", feature: "sunshine_duration", divisor: 10.0, trace_minus_one: true },
    MeteoCode { code: "Q", feature: "global_radiation", divisor: 1.0, trace_minus_one: false },
    MeteoCode { code: "FG", feature: "wind_speed", divisor: 10.0, trace_minus_one: false },
    MeteoCode { code: "DDVEC", feature: "wind_direction", divisor: 1.0, trace_minus_one: false },
    MeteoCode { code: "DR", feature: "precipitation_duration", divisor: 10.0, trace_minus_one: false },
    MeteoCode { code: "RH", feature: "precipitation", divisor: 10.0, trace_minus_one: true },
];

pub fn code_for_feature(feature: &str) -> Option<&'static MeteoCode> {
    METEO_CODES.iter().find(|c| c.feature == feature)
}

pub fn code_by_name(code: &str) -> Option<&'static MeteoCode> {
    METEO_CODES.iter().find(|c| c.code.eq_ignore_ascii_case(code))
}

impl MeteoCode {
    pub fn to_si(&self, raw: i64) -> f64 {
        if self.trace_minus_one && raw == -1 {
            return 0.0;
        }
        raw as f64 / self.divisor
    }

    /// Inverse of [`MeteoCode::to_si`] for values produced by it.
    pub fn from_si(&self, value: f64) -> i64 {
        (value * self.divisor).round() as i64
    }
}

#[derive(Clone, Debug)]
pub struct MeteoData {
    pub table: TimeSeriesTable,
    /// Header columns that were not recognized and were skipped.
    pub ignored_columns: Vec<String>,
}

/// Parses one station file, keeping rows of `station` and the catalog's meteo features.
pub fn parse_meteo(path: &Path, station: &str, catalog: &FeatureCatalog) -> Result<MeteoData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(None)
        .flexible(true)
        .from_path(path)
        .map_err(Error::csv(path))?;
    let header = rdr.headers().map_err(Error::csv(path))?.clone();
    if header.len() < 2 {
        return Err(Error::parse(path, 1, "expected STN,YYYYMMDD,<codes>"));
    }
    let features: Vec<String> = catalog
        .features()
        .iter()
        .filter(|f| code_for_feature(&f.name).is_some() && f.source == crate::ingest::catalog::Source::Meteo)
        .map(|f| f.name.clone())
        .collect();
    let mut column_map: Vec<Option<(usize, &MeteoCode)>> = Vec::new();
    let mut ignored = Vec::new();
    for name in header.iter().skip(2) {
        let name = name.trim_start_matches('#').trim();
        match code_by_name(name) {
            Some(code) => match features.iter().position(|f| f == code.feature) {
                Some(j) => column_map.push(Some((j, code))),
                None => {
                    ignored.push(name.to_string());
                    column_map.push(None)
                }
            },
            None => {
                ignored.push(name.to_string());
                column_map.push(None);
            }
        }
    }
    if !ignored.is_empty() {
        log::warn!("{}: ignored {} unknown column(s): {}", path.display(), ignored.len(), ignored.join(","));
    }

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(Error::csv(path))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if rec.get(0).map(|s| s.trim_start_matches('#').trim()) != Some(station) {
            continue;
        }
        let date_cell = rec.get(1).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_cell, "%Y%m%d")
            .map_err(|_| Error::parse(path, row, format!("unparsable date {date_cell:?}")))?;
        let mut vals = vec![None; features.len()];
        for (k, map) in column_map.iter().enumerate() {
            let Some((j, code)) = map else { continue };
            let cell = rec.get(k + 2).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let raw: i64 = cell.parse().map_err(|_| {
                Error::parse(path, row, format!("non-numeric value {cell:?} in column {}", code.code))
            })?;
            vals[*j] = Some(code.to_si(raw));
        }
        rows.push((date, vals));
    }
    if rows.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: no rows for station {station}",
            path.display()
        )));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Invalid(format!("{}: duplicate date {}", path.display(), w[0].0)));
    }
    let start = rows[0].0;
    let end = rows[rows.len() - 1].0;
    let days = (end - start).num_days() as usize + 1;
    let mut values = Array2::from_elem((days, features.len()), None);
    for (date, vals) in rows {
        let d = (date - start).num_days() as usize;
        for (j, v) in vals.into_iter().enumerate() {
            values[[d, j]] = v;
        }
    }
    Ok(MeteoData {
        table: TimeSeriesTable::new(None, start, features, values)?,
        ignored_columns: ignored,
    })
}

/// Parses several station files and joins them onto one grid.
pub fn parse_meteo_files<P: AsRef<Path>>(
    paths: &[P],
    station: &str,
    catalog: &FeatureCatalog,
) -> Result<MeteoData> {
    let mut tables = Vec::new();
    let mut ignored = Vec::new();
    for p in paths {
        let m = parse_meteo(p.as_ref(), station, catalog)?;
        tables.push(m.table);
        ignored.extend(m.ignored_columns);
    }
    ignored.sort();
    ignored.dedup();
    Ok(MeteoData {
        table: TimeSeriesTable::concat(&tables)?,
        ignored_columns: ignored,
    })
}
