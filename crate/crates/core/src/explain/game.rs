use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::model::Model;

/// A coalition of players as a bit mask: bit `i` set means player `i` is present.
pub type Coalition = u64;

/// Largest player count representable by [`Coalition`].
pub const MAX_PLAYERS: usize = 63;

/// Characteristic function of a cooperative game, evaluated in batches.
pub trait ValueFunction: Sync {
    fn n_players(&self) -> usize;
    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>>;
}

/// Game defined by a plain function of the coalition, mostly for toy models.
pub struct FnGame<F> {
    pub players: usize,
    pub f: F,
}

impl<F: Fn(Coalition) -> f64 + Sync> ValueFunction for FnGame<F> {
    fn n_players(&self) -> usize {
        self.players
    }

    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        Ok(coalitions.iter().map(|&c| (self.f)(c)).collect())
    }
}

pub fn full_coalition(n: usize) -> Coalition {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Window with the coalition's feature columns kept and every other column
/// replaced, over all time steps, by the baseline.
pub fn mask_coalition(window: ArrayView2<'_, f64>, coalition: Coalition, baseline: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if window.dim() != baseline.dim() {
        return Err(Error::Shape(format!("window {:?} vs baseline {:?}", window.dim(), baseline.dim())));
    }
    if window.ncols() > MAX_PLAYERS {
        return Err(Error::TooManyFeatures(window.ncols(), MAX_PLAYERS));
    }
    let mut out = baseline.to_owned();
    for j in 0..window.ncols() {
        if coalition >> j & 1 == 1 {
            out.column_mut(j).assign(&window.column(j));
        }
    }
    Ok(out)
}

/// Batches of masked windows evaluated per call, bounding memory use.
const MASK_BATCH: usize = 1024;

/// Positive-class probability of a masked window: features are the players.
pub struct WindowGame<'a> {
    pub model: &'a Model,
    pub window: ArrayView2<'a, f64>,
    pub baseline: ArrayView2<'a, f64>,
}

impl<'a> WindowGame<'a> {
    pub fn new(model: &'a Model, window: ArrayView2<'a, f64>, baseline: ArrayView2<'a, f64>) -> Result<Self> {
        if window.dim() != baseline.dim() {
            return Err(Error::Shape(format!("window {:?} vs baseline {:?}", window.dim(), baseline.dim())));
        }
        if window.ncols() != model.n_features {
            return Err(Error::Shape(format!("window has {} features, model {}", window.ncols(), model.n_features)));
        }
        Ok(Self { model, window, baseline })
    }
}

impl ValueFunction for WindowGame<'_> {
    fn n_players(&self) -> usize {
        self.window.ncols()
    }

    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(coalitions.len());
        for block in coalitions.chunks(MASK_BATCH) {
            let masked = block
                .iter()
                .map(|&c| mask_coalition(self.window, c, self.baseline))
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<ArrayView2<'_, f64>> = masked.iter().map(|m| m.view()).collect();
            out.extend(self.model.predict_proba(&views)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn masking_semantics() {
        let w = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[10.0, 20.0], [30.0, 40.0]];
        assert_eq!(mask_coalition(w.view(), 0b11, b.view()).unwrap(), w);
        assert_eq!(mask_coalition(w.view(), 0, b.view()).unwrap(), b);
        let m = mask_coalition(w.view(), 0b01, b.view()).unwrap();
        assert_eq!(m, array![[1.0, 20.0], [3.0, 40.0]]);
        assert!(mask_coalition(w.view(), 1, array![[1.0]].view()).is_err());
    }
}
