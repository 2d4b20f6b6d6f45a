//! Shapley attributions of model predictions to whole feature trajectories.

mod game;
pub mod report;
mod shapley;
mod summary;

pub use game::{full_coalition, mask_coalition, Coalition, FnGame, ValueFunction, WindowGame, MAX_PLAYERS};
pub use shapley::{
    exact_shapley, kernel_shap, sample_coalitions, shapley_kernel, CoalitionSample, Estimator, ShapleyValues,
    DEFAULT_COALITIONS, EXACT_MAX_PLAYERS,
};
pub use summary::{
    global_importance, group_difference, local_report, mean_attribution, Attribution, FeatureImportance, GroupDifference,
    LocalRow,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{InputSchema, TrainedModel};
use crate::preprocess::windows::FeatureWindow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplainMethod {
    Exact,
    Kernel { n_coalitions: usize, seed: u64 },
}

impl Default for ExplainMethod {
    fn default() -> Self {
        ExplainMethod::Kernel { n_coalitions: DEFAULT_COALITIONS, seed: 0 }
    }
}

/// Attribution of one window against the model's baseline trajectory.
pub fn explain_window(model: &TrainedModel, schema: &InputSchema, window: &FeatureWindow, method: ExplainMethod) -> Result<Attribution> {
    model.check_schema(schema)?;
    let game = WindowGame::new(&model.model, window.values.view(), model.baseline.view())?;
    let sv = match method {
        ExplainMethod::Exact => exact_shapley(&game)?,
        ExplainMethod::Kernel { n_coalitions, seed } => kernel_shap(&game, n_coalitions, seed)?,
    };
    Ok(Attribution {
        id: window.id(),
        label: Some(window.label),
        base_value: sv.base_value,
        prediction: sv.prediction,
        phi: sv.phi,
        estimator: sv.estimator,
    })
}

/// Explains every window; instances run in parallel and keep input order.
/// Kernel sampling uses seed `seed + index` for window `index`.
pub fn explain_windows(
    model: &TrainedModel,
    schema: &InputSchema,
    windows: &[FeatureWindow],
    method: ExplainMethod,
) -> Result<Vec<Attribution>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let m = match method {
                ExplainMethod::Kernel { n_coalitions, seed } => ExplainMethod::Kernel { n_coalitions, seed: seed.wrapping_add(i as u64) },
                ExplainMethod::Exact => ExplainMethod::Exact,
            };
            explain_window(model, schema, w, m)
        })
        .collect()
}
