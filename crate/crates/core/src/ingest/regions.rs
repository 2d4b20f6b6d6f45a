//! Site configuration: region adjacency, station-to-region mapping, the fixed
//! solar reference coordinate and the feature catalog in use.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::catalog::FeatureCatalog;
use crate::ingest::samples::Region;
use crate::ingest::solar::Site;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default = "default_lat")]
    pub latitude: f64,
    #[serde(default = "default_lon")]
    pub longitude: f64,
    #[serde(default = "default_station")]
    pub meteo_station: String,
}

fn default_lat() -> f64 {
    Site::default().latitude
}
fn default_lon() -> f64 {
    Site::default().longitude
}
fn default_station() -> String {
    "310".to_string()
}

impl Default for SiteConfig {
    fn default() -> Self {
        Self {
            latitude: default_lat(),
            longitude: default_lon(),
            meteo_station: default_station(),
        }
    }
}

impl SiteConfig {
    pub fn site(&self) -> Site {
        Site {
            latitude: self.latitude,
            longitude: self.longitude,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgnoreList {
    #[serde(default)]
    pub stations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSelection {
    pub features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default)]
    pub site: SiteConfig,
    #[serde(default = "default_neighbors")]
    pub neighbors: BTreeMap<Region, Vec<Region>>,
    #[serde(default)]
    pub stations: BTreeMap<String, Region>,
    #[serde(default)]
    pub ignore: IgnoreList,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<CatalogSelection>,
}

/// Adjacency read off the Zeeland sub-region map.
pub fn default_neighbors() -> BTreeMap<Region, Vec<Region>> {
    use Region::*;
    BTreeMap::from([
        (ESE, vec![ESN, ESM]),
        (ESN, vec![ESE, ESM, ESW, GR]),
        (ESW, vec![ESN, ESM, LV]),
        (ESM, vec![ESE, ESN, ESW]),
        (GR, vec![ESN]),
        (LV, vec![ESW]),
    ])
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            site: SiteConfig::default(),
            neighbors: default_neighbors(),
            stations: BTreeMap::new(),
            ignore: IgnoreList::default(),
            catalog: None,
        }
    }
}

/// How a station is treated by the hydro parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationRole {
    Region(Region),
    Ignored,
}

impl RegionConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RegionConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for (r, ns) in &self.neighbors {
            if ns.contains(r) {
                return Err(Error::Config(format!("region {r} lists itself as a neighbor")));
            }
        }
        for s in &self.ignore.stations {
            if self.stations.contains_key(s) {
                return Err(Error::Config(format!("station {s} is both mapped and ignored")));
            }
        }
        self.catalog()?;
        Ok(())
    }

    pub fn station_role(&self, station: &str) -> Option<StationRole> {
        if let Some(r) = self.stations.get(station) {
            return Some(StationRole::Region(*r));
        }
        self.ignore
            .stations
            .iter()
            .any(|s| s == station)
            .then_some(StationRole::Ignored)
    }

    pub fn catalog(&self) -> Result<FeatureCatalog> {
        match &self.catalog {
            Some(sel) => FeatureCatalog::subset(&sel.features),
            None => Ok(FeatureCatalog::full()),
        }
    }

    /// Regions named anywhere in the configuration.
    pub fn regions(&self) -> BTreeSet<Region> {
        let mut out: BTreeSet<Region> = self.neighbors.keys().copied().collect();
        out.extend(self.neighbors.values().flatten().copied());
        out.extend(self.stations.values().copied());
        out
    }
}
