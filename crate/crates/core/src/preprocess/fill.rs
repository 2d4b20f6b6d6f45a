use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::samples::Region;
use crate::ingest::table::TimeSeriesTable;

/// Carries each observation forward over at most `max_gap_days` following
/// missing days. Only original observations start a fill.
pub fn forward_fill(table: &TimeSeriesTable, column: usize, max_gap_days: usize) -> TimeSeriesTable {
    let mut out = table.clone();
    let mut last: Option<(usize, f64)> = None;
    for d in 0..table.n_days() {
        match table.values()[[d, column]] {
            Some(v) => last = Some((d, v)),
            None => {
                if let Some((d0, v)) = last {
                    if d - d0 <= max_gap_days {
                        out.values_mut()[[d, column]] = Some(v);
                    }
                }
            }
        }
    }
    out
}

/// Fills missing `feature` cells of `targets` with the same-day mean over
/// neighbor regions that have a value. Neighbor values are read from the
/// input snapshot, so fills never cascade through filled regions.
///
/// Fails when a target region has no neighbor with data for any day.
pub fn neighbor_region_fill(
    tables: &BTreeMap<Region, TimeSeriesTable>,
    adjacency: &BTreeMap<Region, Vec<Region>>,
    feature: &str,
    targets: &[Region],
) -> Result<BTreeMap<Region, TimeSeriesTable>> {
    let mut out = tables.clone();
    for &region in targets {
        let table = tables
            .get(&region)
            .ok_or_else(|| Error::Invalid(format!("no table for region {region}")))?;
        let col = table
            .column_index(feature)
            .ok_or_else(|| Error::Invalid(format!("feature {feature} not in table of {region}")))?;
        let neighbors: Vec<&TimeSeriesTable> = adjacency
            .get(&region)
            .map(|ns| ns.iter().filter_map(|n| tables.get(n)).collect())
            .unwrap_or_default();
        let target = out.get_mut(&region).unwrap();
        let mut any = false;
        for d in 0..table.n_days() {
            if table.values()[[d, col]].is_some() {
                continue;
            }
            let date = table.date(d);
            let (mut sum, mut n) = (0.0, 0usize);
            for nt in &neighbors {
                let Some(nc) = nt.column_index(feature) else { continue };
                if let Some(v) = nt.get(date, nc) {
                    sum += v;
                    n += 1;
                }
            }
            if n > 0 {
                target.values_mut()[[d, col]] = Some(sum / n as f64);
                any = true;
            }
        }
        if !any && table.observed_count(col) < table.n_days() {
            return Err(Error::NoNeighborData {
                region: region.to_string(),
                feature: feature.to_string(),
            });
        }
    }
    Ok(out)
}

/// Regions whose `feature` column has no observation at all.
pub fn regions_missing_feature(tables: &BTreeMap<Region, TimeSeriesTable>, feature: &str) -> Vec<Region> {
    tables
        .iter()
        .filter(|(_, t)| t.column_index(feature).is_some_and(|c| t.observed_count(c) == 0))
        .map(|(r, _)| *r)
        .collect()
}
