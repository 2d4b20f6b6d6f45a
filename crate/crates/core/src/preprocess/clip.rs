use crate::ingest::catalog::{FeatureCatalog, Source};
use crate::ingest::table::TimeSeriesTable;
use crate::stats::percentile_sorted;

/// Marks hydrological values strictly outside `[P(p_lo), P(p_hi)]` as missing.
///
/// Percentiles are computed per feature over the table's observed values.
/// Features with fewer than two observations are left alone; their names are
/// returned so the caller can report them.
pub fn clip_outliers(
    table: &TimeSeriesTable,
    catalog: &FeatureCatalog,
    p_lo: f64,
    p_hi: f64,
) -> (TimeSeriesTable, Vec<String>) {
    let mut out = table.clone();
    let mut skipped = Vec::new();
    for (j, name) in table.features().iter().enumerate() {
        if catalog.descriptor(name).map(|d| d.source) != Some(Source::Hydro) {
            continue;
        }
        let mut observed: Vec<f64> = table.column(j).iter().flatten().copied().collect();
        if observed.len() < 2 {
            if !observed.is_empty() {
                log::warn!("clip_outliers: {name} has a single value, left untouched");
            }
            skipped.push(name.clone());
            continue;
        }
        observed.sort_by(f64::total_cmp);
        let lo = percentile_sorted(&observed, p_lo);
        let hi = percentile_sorted(&observed, p_hi);
        for cell in out.values_mut().column_mut(j) {
            if cell.is_some_and(|v| v < lo || v > hi) {
                *cell = None;
            }
        }
    }
    (out, skipped)
}
