//! Feature catalog: the fixed, persisted column order of every table and window.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Meteo,
    Hydro,
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    Knn,
    ForwardFill,
    NeighborMean,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub source: Source,
    pub units: String,
    pub imputation_policy: ImputationPolicy,
}

impl FeatureDescriptor {
    pub fn new(name: &str, source: Source, units: &str, policy: ImputationPolicy) -> Self {
        Self {
            name: name.to_string(),
            source,
            units: units.to_string(),
            imputation_policy: policy,
        }
    }
}

/// SHA-256 of the catalog's names, sources, units and policies, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CatalogHash(pub [u8; 32]);

impl CatalogHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Serde(format!("catalog hash: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Serde("catalog hash must be 32 bytes".into()))?;
        Ok(Self(arr))
    }
}

impl std::fmt::Display for CatalogHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDescriptor>", into = "Vec<FeatureDescriptor>")]
pub struct FeatureCatalog {
    features: Vec<FeatureDescriptor>,
}

impl TryFrom<Vec<FeatureDescriptor>> for FeatureCatalog {
    type Error = Error;

    fn try_from(features: Vec<FeatureDescriptor>) -> Result<Self> {
        FeatureCatalog::new(features)
    }
}

impl From<FeatureCatalog> for Vec<FeatureDescriptor> {
    fn from(c: FeatureCatalog) -> Self {
        c.features
    }
}

impl FeatureCatalog {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name {}", f.name)));
            }
            if f.source == Source::Derived && f.imputation_policy != ImputationPolicy::None {
                return Err(Error::Config(format!(
                    "derived feature {} must have imputation policy none",
                    f.name
                )));
            }
            if f.source == Source::Derived && !DERIVED_FEATURES.contains(&f.name.as_str()) {
                return Err(Error::Config(format!("unknown derived feature {}", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// Every feature the ingest layer knows how to produce.
    pub fn full() -> Self {
        use ImputationPolicy::*;
        use Source::*;
        let f = FeatureDescriptor::new;
        Self::new(vec![
            f("week_number", Derived, "week", None),
            f("sunrise_hour", Derived, "h", None),
            f("sunset_hour", Derived, "h", None),
            f("day_length", Derived, "h", None),
            f("mean_temperature", Meteo, "degC", Knn),
            f("max_temperature", Meteo, "degC", Knn),
            f("min_temperature", Meteo, "degC", Knn),
            f("sunshine_duration", Meteo, "h", Knn),
            f("global_radiation", Meteo, "J/cm2", Knn),
            f("wind_speed", Meteo, "m/s", Knn),
            f("wind_direction", Meteo, "deg", Knn),
            f("precipitation_duration", Meteo, "h", Knn),
            f("precipitation", Meteo, "mm", Knn),
            f("oxygen_concentration", Hydro, "mg/L", ForwardFill),
            f("oxygen_saturation", Hydro, "%", ForwardFill),
            f("chlorophyll", Hydro, "ug/L", ForwardFill),
            f("chloride", Hydro, "mg/L", Knn),
            f("chlorosity", Hydro, "g/L", Knn),
            f("pheophytin", Hydro, "ug/L", ForwardFill),
            f("ph", Hydro, "1", Knn),
            f("air_pressure", Hydro, "hPa", Knn),
            f("water_height", Hydro, "cm", Knn),
            f("water_height_calculated", Hydro, "cm", Knn),
            f("water_temperature", Hydro, "degC", Knn),
            f("hydro_wind_direction", Hydro, "deg", Knn),
            f("hydro_wind_speed", Hydro, "m/s", Knn),
            f("conductivity", Hydro, "mS/m", Knn),
            f("salinity", Hydro, "g/L", Knn),
        ])
        .expect("built-in catalog is valid")
    }

    /// Restricts the full catalog to `names`, keeping the full catalog's order.
    pub fn subset<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let full = Self::full();
        for n in names {
            if full.index_of(n.as_ref()).is_none() {
                return Err(Error::Config(format!("unknown feature {}", n.as_ref())));
            }
        }
        let features = full
            .features
            .into_iter()
            .filter(|f| names.iter().any(|n| n.as_ref() == f.name))
            .collect();
        Self::new(features)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn get(&self, index: usize) -> &FeatureDescriptor {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn descriptor(&self, name: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn indices_by_source(&self, source: Source) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.features[i].source == source)
            .collect()
    }

    pub fn hash(&self) -> CatalogHash {
        let mut h = Sha256::new();
        for f in &self.features {
            let line = format!(
                "{}|{:?}|{}|{:?}\n",
                f.name, f.source, f.units, f.imputation_policy
            );
            h.update(line.as_bytes());
        }
        CatalogHash(h.finalize().into())
    }
}

pub const DERIVED_FEATURES: [&str; 4] = ["week_number", "sunrise_hour", "sunset_hour", "day_length"];
