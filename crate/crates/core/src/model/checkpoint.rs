use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::catalog::FeatureCatalog;
use crate::model::network::Model;
use crate::preprocess::normalize::NormalizationBounds;
use crate::preprocess::windows::FeatureWindow;

/// Identifies the feature layout and scaling that windows were built with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSchema {
    pub catalog_hash: String,
    pub bounds_hash: String,
}

impl InputSchema {
    pub fn new(catalog: &FeatureCatalog, bounds: &NormalizationBounds) -> Self {
        Self { catalog_hash: catalog.hash().to_hex(), bounds_hash: bounds.hash_hex() }
    }
}

/// A trained network bundled with everything needed to use it on new windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub catalog: FeatureCatalog,
    pub bounds: NormalizationBounds,
    pub schema: InputSchema,
    /// Mean training window, the reference input for attributions.
    pub baseline: Array2<f64>,
    pub best_epoch: usize,
    pub model: Model,
}

impl TrainedModel {
    pub fn new(
        model: Model,
        catalog: FeatureCatalog,
        bounds: NormalizationBounds,
        train: &[FeatureWindow],
        best_epoch: usize,
    ) -> Result<Self> {
        if catalog.len() != model.n_features || bounds.len() != model.n_features {
            return Err(Error::Shape(format!(
                "model has {} features, catalog {}, bounds {}",
                model.n_features,
                catalog.len(),
                bounds.len()
            )));
        }
        let baseline = mean_window(train)?;
        let schema = InputSchema::new(&catalog, &bounds);
        Ok(Self { catalog, bounds, schema, baseline, best_epoch, model })
    }

    pub fn check_schema(&self, schema: &InputSchema) -> Result<()> {
        if schema.catalog_hash != self.schema.catalog_hash {
            return Err(Error::CatalogMismatch {
                expected: self.schema.catalog_hash.clone(),
                found: schema.catalog_hash.clone(),
            });
        }
        if schema.bounds_hash != self.schema.bounds_hash {
            return Err(Error::BoundsMismatch {
                expected: self.schema.bounds_hash.clone(),
                found: schema.bounds_hash.clone(),
            });
        }
        Ok(())
    }

    /// Positive-class probability of one window.
    pub fn predict(&self, schema: &InputSchema, window: &FeatureWindow) -> Result<f64> {
        Ok(self.predict_all(schema, std::slice::from_ref(window))?[0])
    }

    pub fn predict_all(&self, schema: &InputSchema, windows: &[FeatureWindow]) -> Result<Vec<f64>> {
        self.check_schema(schema)?;
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let v: Vec<ArrayView2<'_, f64>> = windows.iter().map(|w| w.values.view()).collect();
        self.model.predict_proba(&v)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let m: Self = serde_json::from_slice(bytes).map_err(|e| Error::Serde(e.to_string()))?;
        // Stored hashes must describe the stored catalog and bounds.
        m.check_schema(&InputSchema::new(&m.catalog, &m.bounds))?;
        m.model.config.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(Error::io(path))?;
        Self::from_bytes(&bytes)
    }
}

/// Element-wise mean of equally shaped windows.
pub fn mean_window(windows: &[FeatureWindow]) -> Result<Array2<f64>> {
    let first = windows.first().ok_or_else(|| Error::Invalid("no windows to average".into()))?;
    let mut sum = Array2::<f64>::zeros(first.values.dim());
    for w in windows {
        if w.values.dim() != sum.dim() {
            return Err(Error::Shape(format!("window of shape {:?}", w.values.dim())));
        }
        sum += &w.values;
    }
    Ok(sum / windows.len() as f64)
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
