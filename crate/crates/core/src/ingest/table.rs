//! Daily feature tables on a contiguous date grid.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::ingest::samples::Region;

/// Days × features with explicit missing cells.
///
/// The date grid has no gaps: day `i` is `start + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesTable {
    pub region: Option<Region>,
    start: NaiveDate,
    features: Vec<String>,
    values: Array2<Option<f64>>,
}

impl TimeSeriesTable {
    pub fn new(
        region: Option<Region>,
        start: NaiveDate,
        features: Vec<String>,
        values: Array2<Option<f64>>,
    ) -> Result<Self> {
        if values.ncols() != features.len() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                features.len(),
                values.ncols()
            )));
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("table value {v}")));
        }
        Ok(Self {
            region,
            start,
            features,
            values,
        })
    }

    /// All-missing table spanning `start..=end`.
    pub fn empty(region: Option<Region>, start: NaiveDate, end: NaiveDate, features: Vec<String>) -> Self {
        let days = ((end - start).num_days() + 1).max(0) as usize;
        let values = Array2::from_elem((days, features.len()), None);
        Self {
            region,
            start,
            features,
            values,
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Last date on the grid; equals `start - 1` for an empty table.
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.n_days() as i64 - 1)
    }

    pub fn n_days(&self) -> usize {
        self.values.nrows()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn values(&self) -> &Array2<Option<f64>> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Option<f64>> {
        &mut self.values
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let off = (date - self.start).num_days();
        (off >= 0 && (off as usize) < self.n_days()).then_some(off as usize)
    }

    pub fn get(&self, date: NaiveDate, column: usize) -> Option<f64> {
        self.day_index(date).and_then(|d| self.values[[d, column]])
    }

    pub fn column(&self, column: usize) -> ArrayView1<'_, Option<f64>> {
        self.values.column(column)
    }

    pub fn observed_count(&self, column: usize) -> usize {
        self.values.column(column).iter().filter(|v| v.is_some()).count()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Values re-laid onto a different grid and column order; cells outside
    /// this table, or columns it lacks, are missing.
    pub fn reindexed(&self, start: NaiveDate, end: NaiveDate, features: &[String]) -> Self {
        let mut out = Self::empty(self.region, start, end, features.to_vec());
        let cols: Vec<Option<usize>> = features.iter().map(|f| self.column_index(f)).collect();
        for day in 0..out.n_days() {
            let Some(src) = self.day_index(out.date(day)) else {
                continue;
            };
            for (j, c) in cols.iter().enumerate() {
                if let Some(c) = c {
                    out.values[[day, j]] = self.values[[src, *c]];
                }
            }
        }
        out
    }

    /// Concatenates tables with identical columns onto one contiguous grid.
    /// Overlapping days must agree where both are observed.
    pub fn concat(tables: &[TimeSeriesTable]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::Invalid("no tables to concatenate".into()))?;
        let start = tables.iter().map(|t| t.start).min().unwrap();
        let end = tables.iter().map(|t| t.end()).max().unwrap();
        let mut out = Self::empty(first.region, start, end, first.features.clone());
        for t in tables {
            if t.features != first.features {
                return Err(Error::Shape("tables have different columns".into()));
            }
            for day in 0..t.n_days() {
                let dst = out.day_index(t.date(day)).unwrap();
                for c in 0..t.features.len() {
                    if let Some(v) = t.values[[day, c]] {
                        match out.values[[dst, c]] {
                            Some(prev) if prev != v => {
                                return Err(Error::Invalid(format!(
                                    "conflicting values for {} on {}",
                                    t.features[c],
                                    t.date(day)
                                )))
                            }
                            _ => out.values[[dst, c]] = Some(v),
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Writes region tables as one wide CSV: `region,date,<features...>`, empty = missing.
pub fn write_tables(path: &Path, tables: &BTreeMap<Region, TimeSeriesTable>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    let Some(first) = tables.values().next() else {
        return Err(Error::Invalid("no tables to write".into()));
    };
    let mut header = vec!["region".to_string(), "date".to_string()];
    header.extend(first.features.iter().cloned());
    w.write_record(&header).map_err(Error::csv(path))?;
    for (region, t) in tables {
        if t.features != first.features {
            return Err(Error::Shape("region tables have different columns".into()));
        }
        for day in 0..t.n_days() {
            let mut row = Vec::with_capacity(header.len());
            row.push(region.to_string());
            row.push(t.date(day).format("%Y-%m-%d").to_string());
            for v in t.values.row(day) {
                row.push(v.map(|x| x.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(Error::csv(path))?;
        }
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_tables(path: &Path) -> Result<BTreeMap<Region, TimeSeriesTable>> {
    let mut rdr = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let header = rdr.headers().map_err(Error::csv(path))?.clone();
    if header.len() < 2 {
        return Err(Error::parse(path, 1, "expected region,date,<features>"));
    }
    let features: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut rows: BTreeMap<Region, Vec<(NaiveDate, Vec<Option<f64>>)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(Error::csv(path))?;
        let region: Region = rec[0].parse().map_err(|e: Error| Error::parse(path, row, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, row, format!("bad date: {e}")))?;
        let mut vals = Vec::with_capacity(features.len());
        for cell in rec.iter().skip(2) {
            if cell.is_empty() {
                vals.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse(path, row, format!("non-numeric cell {cell:?}")))?;
                vals.push(Some(v));
            }
        }
        rows.entry(region).or_default().push((date, vals));
    }
    let mut out = BTreeMap::new();
    for (region, mut rs) in rows {
        rs.sort_by_key(|r| r.0);
        let start = rs[0].0;
        let end = rs[rs.len() - 1].0;
        let mut t = TimeSeriesTable::empty(Some(region), start, end, features.clone());
        for (date, vals) in rs {
            let d = t.day_index(date).unwrap();
            for (c, v) in vals.into_iter().enumerate() {
                t.values[[d, c]] = v;
            }
        }
        out.insert(region, TimeSeriesTable::new(t.region, t.start, t.features, t.values)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn concat_fills_interior_gap_with_missing_rows() {
        let f = vec!["a".to_string()];
        let a = TimeSeriesTable::new(None, d("2020-12-30"), f.clone(), Array2::from_elem((2, 1), Some(1.0))).unwrap();
        let b = TimeSeriesTable::new(None, d("2021-01-03"), f, Array2::from_elem((2, 1), Some(2.0))).unwrap();
        let c = TimeSeriesTable::concat(&[b, a]).unwrap();
        assert_eq!(c.start(), d("2020-12-30"));
        assert_eq!(c.end(), d("2021-01-04"));
        let col: Vec<_> = c.column(0).to_vec();
        assert_eq!(col, vec![Some(1.0), Some(1.0), None, None, Some(2.0), Some(2.0)]);
    }

    #[test]
    fn non_finite_rejected() {
        let r = TimeSeriesTable::new(None, d("2020-01-01"), vec!["a".into()], Array2::from_elem((1, 1), Some(f64::NAN)));
        assert!(r.is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut vals = Array2::from_elem((3, 2), None);
        vals[[0, 0]] = Some(0.1 + 0.2);
        vals[[2, 1]] = Some(-1.0e-300);
        let t = TimeSeriesTable::new(Some(Region::GR), d("2020-02-28"), vec!["x".into(), "y".into()], vals).unwrap();
        let mut m = BTreeMap::new();
        m.insert(Region::GR, t.clone());
        write_tables(&p, &m).unwrap();
        let back = read_tables(&p).unwrap();
        assert_eq!(back[&Region::GR], t);
    }
}
