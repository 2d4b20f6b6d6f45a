use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::table::TimeSeriesTable;

/// Weighted k-nearest-neighbor imputer over the rows of a matrix.
///
/// Distance between two rows is the nan-aware Euclidean distance
/// `sqrt(F / n_shared * sum_shared (x - y)^2)`, taken over the columns both
/// rows observe. Donors for a missing cell are the rows observing that
/// column, ordered by (distance, row index); rows sharing no observed column
/// with the receiver are never donors. Among the `k` nearest donors, an exact
/// match (distance 0) takes all the weight; otherwise weights are 1/distance.
/// A cell without any eligible donor falls back to the column mean.
#[derive(Clone, Debug)]
pub struct KnnImputer {
    pub k: usize,
    /// Per-column divisor applied to differences before the distance sum.
    pub scale: Option<Vec<f64>>,
}

impl Default for KnnImputer {
    fn default() -> Self {
        Self { k: 7, scale: None }
    }
}

impl KnnImputer {
    pub fn new(k: usize) -> Self {
        Self { k, scale: None }
    }

    /// Scales every column by its observed standard deviation (1 when degenerate).
    pub fn standardized(k: usize, matrix: &Array2<Option<f64>>) -> Self {
        let scale = matrix
            .columns()
            .into_iter()
            .map(|c| {
                let v: Vec<f64> = c.iter().flatten().copied().collect();
                let sd = if v.len() > 1 { crate::stats::std_dev(&v) } else { 0.0 };
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { k, scale: Some(scale) }
    }

    fn distance(&self, a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            if let (Some(x), Some(y)) = (x, y) {
                let mut d = x - y;
                if let Some(s) = &self.scale {
                    d /= s[j];
                }
                sum += d * d;
                n += 1;
            }
        }
        (n > 0).then(|| (a.len() as f64 / n as f64 * sum).sqrt())
    }

    /// Imputes every missing cell. Errors with the index of the first column
    /// that has no observed value.
    pub fn impute(&self, matrix: &Array2<Option<f64>>) -> std::result::Result<Array2<f64>, usize> {
        let (n_rows, n_cols) = matrix.dim();
        let mut col_mean = vec![0.0; n_cols];
        for j in 0..n_cols {
            let v: Vec<f64> = matrix.column(j).iter().flatten().copied().collect();
            if v.is_empty() {
                return Err(j);
            }
            col_mean[j] = crate::stats::mean(&v);
        }
        let rows: Vec<Vec<Option<f64>>> = matrix.rows().into_iter().map(|r| r.to_vec()).collect();
        let filled: Vec<Vec<f64>> = rows
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.iter().all(Option::is_some) {
                    return row.iter().map(|v| v.unwrap()).collect();
                }
                let dists: Vec<Option<f64>> = rows
                    .iter()
                    .enumerate()
                    .map(|(r, other)| if r == i { None } else { self.distance(row, other) })
                    .collect();
                row.iter()
                    .enumerate()
                    .map(|(j, v)| match v {
                        Some(v) => *v,
                        None => self.fill_cell(&rows, &dists, j).unwrap_or(col_mean[j]),
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<f64> = filled.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((n_rows, n_cols), flat).expect("shape preserved"))
    }

    fn fill_cell(&self, rows: &[Vec<Option<f64>>], dists: &[Option<f64>], j: usize) -> Option<f64> {
        let mut donors: Vec<(f64, usize, f64)> = rows
            .iter()
            .enumerate()
            .filter_map(|(r, row)| Some((dists[r]?, r, row[j]?)))
            .collect();
        if donors.is_empty() {
            return None;
        }
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        donors.truncate(self.k.max(1));
        if donors[0].0 == 0.0 {
            let exact: Vec<f64> = donors.iter().filter(|d| d.0 == 0.0).map(|d| d.2).collect();
            return Some(crate::stats::mean(&exact));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (d, _, v) in donors {
            num += v / d;
            den += 1.0 / d;
        }
        Some(num / den)
    }
}

/// Imputes a region table, naming the region and feature of an empty column.
pub fn knn_impute_table(table: &TimeSeriesTable, imputer: &KnnImputer) -> Result<TimeSeriesTable> {
    let filled = imputer.impute(table.values()).map_err(|j| Error::EmptyColumn {
        feature: table.features()[j].clone(),
        region: table.region.map_or_else(|| "-".to_string(), |r| r.to_string()),
    })?;
    TimeSeriesTable::new(table.region, table.start(), table.features().to_vec(), filled.mapv(Some))
}
