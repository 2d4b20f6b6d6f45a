//! Analytical TTX results: parsing, labels and deduplication.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limit of detection, µg TTX/kg. Detected values at or above it count as positive.
pub const LOD_UG_PER_KG: f64 = 10.0;
/// Action limit, µg TTX/kg (strictly above).
pub const AL_UG_PER_KG: f64 = 22.0;
/// Legal limit, µg TTX/kg (strictly above).
pub const LL_UG_PER_KG: f64 = 44.0;

/// Monitoring sub-regions of the Zeeland estuary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    ESE,
    ESN,
    ESW,
    ESM,
    GR,
    LV,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::ESE,
        Region::ESN,
        Region::ESW,
        Region::ESM,
        Region::GR,
        Region::LV,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::ESE => "ESE",
            Region::ESN => "ESN",
            Region::ESW => "ESW",
            Region::ESM => "ESM",
            Region::GR => "GR",
            Region::LV => "LV",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ESE" => Ok(Region::ESE),
            "ESN" => Ok(Region::ESN),
            "ESW" => Ok(Region::ESW),
            "ESM" => Ok(Region::ESM),
            "GR" => Ok(Region::GR),
            // Lake Veere is labelled VM on some maps.
            "LV" | "VM" => Ok(Region::LV),
            other => Err(Error::Invalid(format!("unknown region {other:?}"))),
        }
    }
}

/// A measured TTX concentration. `NotDetected` orders below every detected value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum Concentration {
    NotDetected,
    Detected(f64),
}

impl Concentration {
    pub fn value(self) -> Option<f64> {
        match self {
            Concentration::NotDetected => None,
            Concentration::Detected(v) => Some(v),
        }
    }
}

/// Which threshold defines a positive label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelMode {
    #[default]
    AL,
    LL,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AL" => Ok(LabelMode::AL),
            "LL" => Ok(LabelMode::LL),
            other => Err(Error::Invalid(format!("unknown label mode {other:?}"))),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::AL => "AL",
            LabelMode::LL => "LL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub region: Region,
    pub date: NaiveDate,
    pub ttx: Concentration,
    pub above_lod: bool,
    pub above_al: bool,
    pub above_ll: bool,
}

impl SampleRecord {
    pub fn new(region: Region, date: NaiveDate, ttx: Concentration) -> Self {
        let v = ttx.value();
        Self {
            region,
            date,
            ttx,
            above_lod: v.is_some_and(|x| x >= LOD_UG_PER_KG),
            above_al: v.is_some_and(|x| x > AL_UG_PER_KG),
            above_ll: v.is_some_and(|x| x > LL_UG_PER_KG),
        }
    }

    pub fn label(&self, mode: LabelMode) -> bool {
        match mode {
            LabelMode::AL => self.above_al,
            LabelMode::LL => self.above_ll,
        }
    }

    /// Stable identifier, unique after deduplication.
    pub fn id(&self) -> String {
        format!("{}_{}", self.region, self.date.format("%Y-%m-%d"))
    }
}

/// Keeps one record per (region, date): the one with the highest concentration.
///
/// Output is ordered by (region, date).
pub fn deduplicate(samples: &[SampleRecord]) -> Vec<SampleRecord> {
    let mut best: BTreeMap<(Region, NaiveDate), SampleRecord> = BTreeMap::new();
    for s in samples {
        best.entry((s.region, s.date))
            .and_modify(|kept| {
                if s.ttx > kept.ttx {
                    *kept = *s;
                }
            })
            .or_insert(*s);
    }
    best.into_values().collect()
}

/// Reads `region,date,ttx_ug_per_kg`; an empty concentration means not detected.
pub fn parse_samples(path: &Path) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::csv(path))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(Error::csv(path))?;
        if rec.len() < 3 {
            return Err(Error::parse(path, row, "expected region,date,ttx_ug_per_kg"));
        }
        let region: Region = rec[0]
            .parse()
            .map_err(|e: Error| Error::parse(path, row, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, row, format!("bad date {:?}: {e}", &rec[1])))?;
        let ttx = if rec[2].is_empty() {
            Concentration::NotDetected
        } else {
            let v: f64 = rec[2]
                .parse()
                .map_err(|_| Error::parse(path, row, format!("non-numeric concentration {:?}", &rec[2])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parse(path, row, format!("invalid concentration {v}")));
            }
            Concentration::Detected(v)
        };
        out.push(SampleRecord::new(region, date, ttx));
    }
    Ok(out)
}

pub fn write_samples(path: &Path, samples: &[SampleRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["region", "date", "ttx_ug_per_kg"])
        .map_err(Error::csv(path))?;
    for s in samples {
        let conc = s.ttx.value().map(|v| v.to_string()).unwrap_or_default();
        w.write_record([s.region.to_string(), s.date.format("%Y-%m-%d").to_string(), conc])
            .map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn rec(c: Option<f64>) -> SampleRecord {
        let ttx = c.map_or(Concentration::NotDetected, Concentration::Detected);
        SampleRecord::new(Region::ESE, d("2020-06-01"), ttx)
    }

    #[test]
    fn thresholds() {
        let nd = rec(None);
        assert!(!nd.above_lod && !nd.above_al && !nd.above_ll);
        let at_lod = rec(Some(10.0));
        assert!(at_lod.above_lod && !at_lod.above_al);
        let at_al = rec(Some(22.0));
        assert!(at_al.above_lod && !at_al.above_al);
        let above_al = rec(Some(22.5));
        assert!(above_al.above_al && !above_al.above_ll);
        let at_ll = rec(Some(44.0));
        assert!(at_ll.above_al && !at_ll.above_ll);
        assert!(rec(Some(44.1)).above_ll);
        assert!(!rec(Some(5.0)).above_lod);
    }

    #[test]
    fn dedup_keeps_maximum() {
        let out = deduplicate(&[rec(Some(30.0)), rec(Some(12.0))]);
        assert_eq!(out, vec![rec(Some(30.0))]);
        let out = deduplicate(&[rec(None), rec(Some(15.0))]);
        assert_eq!(out, vec![rec(Some(15.0))]);
        assert_eq!(deduplicate(&[rec(Some(3.0))]), vec![rec(Some(3.0))]);
        assert!(deduplicate(&[]).is_empty());
    }

    fn arb_sample() -> impl Strategy<Value = SampleRecord> {
        (0usize..6, 0i64..20, prop::option::of(0.0f64..100.0)).prop_map(|(r, day, c)| {
            let date = d("2020-01-01") + chrono::Duration::days(day);
            let ttx = c.map_or(Concentration::NotDetected, Concentration::Detected);
            SampleRecord::new(Region::ALL[r], date, ttx)
        })
    }

    proptest! {
        #[test]
        fn dedup_idempotent_and_unique(samples in prop::collection::vec(arb_sample(), 0..60)) {
            let once = deduplicate(&samples);
            prop_assert_eq!(deduplicate(&once), once.clone());
            let mut keys: Vec<_> = once.iter().map(|s| (s.region, s.date)).collect();
            keys.dedup();
            prop_assert_eq!(keys.len(), once.len());
            for s in &samples {
                prop_assert!(s.above_ll <= s.above_al && s.above_al <= s.above_lod);
                let kept = once.iter().find(|k| k.region == s.region && k.date == s.date).unwrap();
                prop_assert!(kept.ttx >= s.ttx);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = vec![rec(None), SampleRecord::new(Region::LV, d("2021-07-03"), Concentration::Detected(31.25))];
        write_samples(&p, &s).unwrap();
        assert_eq!(parse_samples(&p).unwrap(), s);
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "region,date,ttx_ug_per_kg\nESE,2020-01-01,1\nESE,2020-01-02,abc\n").unwrap();
        match parse_samples(&p) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
