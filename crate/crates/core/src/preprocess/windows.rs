use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::samples::{LabelMode, Region, SampleRecord};
use crate::ingest::table::TimeSeriesTable;

pub const WINDOW_DAYS: usize = 35;

/// The 35 days strictly before a sample, oldest first, plus its label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub sample: SampleRecord,
    pub values: Array2<f64>,
    pub label: bool,
}

impl FeatureWindow {
    pub fn id(&self) -> String {
        self.sample.id()
    }

    pub fn first_day(&self) -> NaiveDate {
        self.sample.date - Duration::days(WINDOW_DAYS as i64)
    }

    /// Same window with the label recomputed under `mode`.
    pub fn relabeled(&self, mode: LabelMode) -> Self {
        Self {
            label: self.sample.label(mode),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Samples whose window reaches outside the table's date range.
    pub out_of_range: usize,
    /// Samples in a region with no table.
    pub unknown_region: usize,
    /// Samples whose window still contains missing cells.
    pub incomplete: usize,
}

impl WindowReport {
    pub fn dropped(&self) -> usize {
        self.out_of_range + self.unknown_region + self.incomplete
    }
}

/// Extracts one window per sample from complete (normalized) tables.
pub fn build_windows(
    samples: &[SampleRecord],
    tables: &BTreeMap<Region, TimeSeriesTable>,
    mode: LabelMode,
) -> Result<(Vec<FeatureWindow>, WindowReport)> {
    let mut report = WindowReport::default();
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let Some(t) = tables.get(&s.region) else {
            report.unknown_region += 1;
            continue;
        };
        let first = s.date - Duration::days(WINDOW_DAYS as i64);
        let last = s.date - Duration::days(1);
        let (Some(d0), Some(_)) = (t.day_index(first), t.day_index(last)) else {
            report.out_of_range += 1;
            continue;
        };
        let block = t.values().slice(s![d0..d0 + WINDOW_DAYS, ..]);
        if block.iter().any(Option::is_none) {
            report.incomplete += 1;
            continue;
        }
        out.push(FeatureWindow {
            sample: s.clone(),
            values: block.mapv(|v| v.unwrap()),
            label: s.label(mode),
        });
    }
    if report.dropped() > 0 {
        log::warn!(
            "dropped {} sample(s): {} out of range, {} unknown region, {} incomplete",
            report.dropped(),
            report.out_of_range,
            report.unknown_region,
            report.incomplete
        );
    }
    Ok((out, report))
}

/// Calendar years assigned to each split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitYears {
    pub train_first: i32,
    pub train_last: i32,
    pub validation: i32,
    pub test: i32,
}

impl Default for SplitYears {
    fn default() -> Self {
        Self {
            train_first: 2016,
            train_last: 2021,
            validation: 2022,
            test: 2023,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitYears {
    pub fn classify(&self, date: NaiveDate) -> Option<SplitKind> {
        let y = date.year();
        if (self.train_first..=self.train_last).contains(&y) {
            Some(SplitKind::Train)
        } else if y == self.validation {
            Some(SplitKind::Validation)
        } else if y == self.test {
            Some(SplitKind::Test)
        } else {
            None
        }
    }

    pub fn is_train(&self, date: NaiveDate) -> bool {
        self.classify(date) == Some(SplitKind::Train)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<FeatureWindow>,
    pub validation: Vec<FeatureWindow>,
    pub test: Vec<FeatureWindow>,
    /// Windows dated outside every split year.
    pub unassigned: usize,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn positives(&self) -> (usize, usize, usize) {
        let p = |w: &[FeatureWindow]| w.iter().filter(|w| w.label).count();
        (p(&self.train), p(&self.validation), p(&self.test))
    }

    pub fn relabeled(&self, mode: LabelMode) -> Self {
        let r = |w: &[FeatureWindow]| w.iter().map(|w| w.relabeled(mode)).collect();
        Self {
            train: r(&self.train),
            validation: r(&self.validation),
            test: r(&self.test),
            unassigned: self.unassigned,
        }
    }
}

pub fn split_by_year(windows: Vec<FeatureWindow>, years: SplitYears) -> DatasetSplit {
    let mut split = DatasetSplit::default();
    for w in windows {
        match years.classify(w.sample.date) {
            Some(SplitKind::Train) => split.train.push(w),
            Some(SplitKind::Validation) => split.validation.push(w),
            Some(SplitKind::Test) => split.test.push(w),
            None => split.unassigned += 1,
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::samples::Concentration;

    fn table(start: NaiveDate, days: usize) -> TimeSeriesTable {
        // Cell value encodes the day offset so windows can be checked by date.
        let vals = Array2::from_shape_fn((days, 2), |(d, j)| Some(d as f64 + 1000.0 * j as f64));
        TimeSeriesTable::new(Some(Region::ESE), start, vec!["a".into(), "b".into()], vals).unwrap()
    }

    fn sample(date: NaiveDate, v: f64) -> SampleRecord {
        SampleRecord::new(Region::ESE, date, Concentration::Detected(v))
    }

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn window_covers_days_strictly_before() {
        let start = ymd(2022, 1, 1);
        let t = table(start, 365);
        let tables = BTreeMap::from([(Region::ESE, t.clone())]);
        let s = sample(ymd(2022, 7, 1), 30.0);
        let (w, report) = build_windows(&[s], &tables, LabelMode::AL).unwrap();
        assert_eq!(report.dropped(), 0);
        let w = &w[0];
        assert_eq!(w.first_day(), ymd(2022, 5, 27));
        assert_eq!(w.values.nrows(), 35);
        for r in 0..35 {
            let day = t.day_index(ymd(2022, 5, 27) + Duration::days(r as i64)).unwrap();
            assert_eq!(w.values[[r, 0]], day as f64);
        }
        // Nothing from the sampling day.
        let sample_day = t.day_index(ymd(2022, 7, 1)).unwrap() as f64;
        assert!(w.values.column(0).iter().all(|&v| v < sample_day));
        assert!(w.label);
        assert_eq!(split_by_year(vec![w.clone()], SplitYears::default()).sizes(), (0, 1, 0));
    }

    #[test]
    fn boundary_at_data_start() {
        let start = ymd(2020, 1, 1);
        let tables = BTreeMap::from([(Region::ESE, table(start, 100))]);
        let ok = sample(start + Duration::days(35), 1.0);
        let early = sample(start + Duration::days(34), 1.0);
        let (w, report) = build_windows(&[ok, early], &tables, LabelMode::AL).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(report.out_of_range, 1);
        assert_eq!(w[0].values[[0, 0]], 0.0);
    }

    #[test]
    fn split_partitions_by_year() {
        let years = SplitYears::default();
        let start = ymd(2015, 1, 1);
        let tables = BTreeMap::from([(Region::ESE, table(start, 365 * 10))]);
        let samples: Vec<_> = (2015..=2024).map(|y| sample(ymd(y, 6, 1), 5.0)).collect();
        let (w, _) = build_windows(&samples, &tables, LabelMode::AL).unwrap();
        let split = split_by_year(w, years);
        assert_eq!(split.sizes(), (6, 1, 1));
        assert_eq!(split.unassigned, 2);
        assert!(split.train.iter().all(|w| (2016..=2021).contains(&w.sample.date.year())));
    }

    #[test]
    fn relabel_changes_only_labels() {
        let w = FeatureWindow {
            sample: sample(ymd(2022, 3, 1), 30.0),
            values: Array2::zeros((35, 2)),
            label: true,
        };
        let ll = w.relabeled(LabelMode::LL);
        assert!(!ll.label);
        assert_eq!(ll.values, w.values);
        assert_eq!(ll.sample, w.sample);
    }
}
