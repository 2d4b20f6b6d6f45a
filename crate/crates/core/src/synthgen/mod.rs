//! Seeded synthetic monitoring data with planted drivers.
//!
//! Every feature is a seasonal cosine plus a region offset plus AR(1) noise.
//! Labels follow a latent logistic model over the 35-day trailing means of
//! the planted drivers, with the intercept calibrated to the target
//! prevalence. Output uses the same file formats that ingest reads.

pub mod features;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::catalog::{FeatureCatalog, ImputationPolicy, Source};
use crate::ingest::meteo::code_for_feature;
use crate::ingest::regions::{CatalogSelection, RegionConfig};
use crate::ingest::samples::{write_samples, Concentration, Region, SampleRecord, AL_UG_PER_KG};
use crate::ingest::table::TimeSeriesTable;
use crate::ingest::{derived_value, Site};
use crate::preprocess::WINDOW_DAYS;

pub use features::{model_for, FeatureModel};

/// File names written by [`SyntheticDataset::write`].
pub const METEO_FILE: &str = "meteo.csv";
pub const HYDRO_FILE: &str = "hydro.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REGIONS_FILE: &str = "regions.toml";
pub const TRUTH_FILE: &str = "ground_truth.json";

/// Concentration is `AL * exp(CONCENTRATION_SCALE * u)` for latent margin `u`.
const CONCENTRATION_SCALE: f64 = 0.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Driver {
    pub feature: String,
    pub coefficient: f64,
}

impl Driver {
    pub fn new(feature: &str, coefficient: f64) -> Self {
        Self { feature: feature.to_string(), coefficient }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Missingness {
    /// Forward-fill features are observed once per calendar month.
    pub monthly_sparse: bool,
    /// Cell-wise missing rate of knn-policy hydrological features.
    pub knn_hydro_rate: f64,
    /// Cell-wise missing rate of meteorological features.
    pub knn_meteo_rate: f64,
    /// One (region, feature) pair with no observations at all.
    pub absent: Option<(Region, String)>,
}

impl Default for Missingness {
    fn default() -> Self {
        Self {
            monthly_sparse: true,
            knn_hydro_rate: 0.05,
            knn_meteo_rate: 0.01,
            absent: Some((Region::ESM, "conductivity".to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// First and last calendar year with samples. Series start on 1 November
    /// of the year before so January samples have full windows.
    pub first_year: i32,
    pub last_year: i32,
    pub regions: Vec<Region>,
    pub features: Vec<String>,
    pub drivers: Vec<Driver>,
    /// Multiplier on every AR innovation.
    pub noise_scale: f64,
    /// Standard deviation of the Gaussian latent noise in the label model.
    pub label_noise: f64,
    pub missingness: Missingness,
    pub prevalence: f64,
    /// Fraction of samples that get a second, lower-concentration record.
    pub duplicate_rate: f64,
    /// Samples taken on consecutive days at each monitoring visit.
    pub samples_per_visit: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let features = [
            "day_length",
            "mean_temperature",
            "sunshine_duration",
            "global_radiation",
            "wind_speed",
            "wind_direction",
            "precipitation",
            "oxygen_concentration",
            "chlorophyll",
            "chloride",
            "ph",
            "water_height",
            "water_temperature",
            "conductivity",
            "salinity",
        ];
        Self {
            first_year: 2016,
            last_year: 2023,
            regions: Region::ALL.to_vec(),
            features: features.iter().map(|s| s.to_string()).collect(),
            drivers: vec![
                Driver::new("day_length", 2.4),
                Driver::new("global_radiation", 2.0),
                Driver::new("water_temperature", 2.4),
                Driver::new("chloride", -2.4),
            ],
            noise_scale: 1.0,
            label_noise: 0.3,
            missingness: Missingness::default(),
            prevalence: 0.08,
            duplicate_rate: 0.05,
            samples_per_visit: 1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Same layout as the default with every coefficient zeroed and six
    /// samples per visit, so held-out AUC under the null has a small spread.
    pub fn null() -> Self {
        let mut cfg = Self::default();
        for d in &mut cfg.drivers {
            d.coefficient = 0.0;
        }
        cfg.samples_per_visit = 6;
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
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

    pub fn catalog(&self) -> Result<FeatureCatalog> {
        FeatureCatalog::subset(&self.features)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.last_year < self.first_year {
            return bad(format!("last_year {} precedes first_year {}", self.last_year, self.first_year));
        }
        if self.regions.is_empty() {
            return bad("no regions".into());
        }
        let catalog = self.catalog()?;
        if !(self.prevalence > 0.0 && self.prevalence < 0.5) {
            return bad(format!("prevalence {} is outside (0, 0.5)", self.prevalence));
        }
        for d in &self.drivers {
            if !d.coefficient.is_finite() {
                return bad(format!("coefficient of {} is not finite", d.feature));
            }
            if catalog.index_of(&d.feature).is_none() {
                return bad(format!("driver {} is not in the feature list", d.feature));
            }
        }
        for (name, v, hi) in [
            ("noise_scale", self.noise_scale, f64::INFINITY),
            ("label_noise", self.label_noise, f64::INFINITY),
            ("knn_hydro_rate", self.missingness.knn_hydro_rate, 0.5),
            ("knn_meteo_rate", self.missingness.knn_meteo_rate, 0.5),
            ("duplicate_rate", self.duplicate_rate, 1.0),
        ] {
            if !(v.is_finite() && (0.0..=hi).contains(&v)) {
                return bad(format!("{name} = {v} is out of range"));
            }
        }
        if !(1..=6).contains(&self.samples_per_visit) {
            return bad("samples_per_visit must be in 1..=6".into());
        }
        if let Some((_, f)) = &self.missingness.absent {
            if catalog.descriptor(f).is_some_and(|d| d.source == Source::Derived) {
                return bad(format!("derived feature {f} cannot be absent"));
            }
        }
        Ok(())
    }

    pub fn start_date(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.first_year - 1, 11, 1).expect("valid year")
    }

    pub fn end_date(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.last_year, 12, 31).expect("valid year")
    }
}

/// What the generator planted; acceptance tests read this instead of
/// re-deriving it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Drivers with nonzero coefficients, in configuration order.
    pub drivers: Vec<Driver>,
    pub intercept: f64,
    pub target_prevalence: f64,
    pub realized_prevalence: f64,
    /// Distinct (region, date) samples.
    pub n_samples: usize,
    pub n_positive: usize,
    pub seed: u64,
}

impl GroundTruth {
    pub fn driver_names(&self) -> Vec<String> {
        self.drivers.iter().map(|d| d.feature.clone()).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Ok(serde_json::from_str(&s)?)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub config: SynthConfig,
    pub catalog: FeatureCatalog,
    pub region_config: RegionConfig,
    /// Noise-free-of-gaps tables the labels were computed from.
    pub complete: BTreeMap<Region, TimeSeriesTable>,
    /// The same tables after missingness injection, as ingest would assemble them.
    pub observed: BTreeMap<Region, TimeSeriesTable>,
    /// Records in file order, duplicates included.
    pub samples: Vec<SampleRecord>,
    pub truth: GroundTruth,
    /// Intercept plus driver effect of every distinct sample, keyed by
    /// sample id: the log-odds of a positive label before latent noise.
    pub risk: BTreeMap<String, f64>,
}

/// Hydro station ids per region. ESE has two stations whose readings
/// average to the region value.
pub fn station_ids(region: Region) -> Vec<String> {
    match region {
        Region::ESE => vec!["ZL_ESE_1".into(), "ZL_ESE_2".into()],
        r => vec![format!("ZL_{r}_1")],
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn wraps(feature: &str) -> bool {
    feature.ends_with("wind_direction")
}

/// Daily series of one feature: seasonal shape plus offset plus AR(1) noise.
fn simulate(model: &FeatureModel, feature: &str, dates: &[NaiveDate], offset: f64, noise_scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = model.noise_sd * noise_scale;
    let stationary = if model.phi.abs() < 1.0 { sd / (1.0 - model.phi * model.phi).sqrt() } else { sd };
    let mut a: f64 = stationary * rng.sample::<f64, _>(StandardNormal);
    dates
        .iter()
        .map(|d| {
            let raw = model.seasonal(f64::from(d.ordinal())) + offset + a;
            a = model.phi * a + sd * rng.sample::<f64, _>(StandardNormal);
            if wraps(feature) {
                let r = (raw - 1.0).rem_euclid(360.0) + 1.0;
                model.finish(r)
            } else {
                model.finish(raw)
            }
        })
        .collect()
}

/// Monitoring calendar of one region: one visit per month from October to
/// May, weekly visits from June to September.
fn visit_dates(cfg: &SynthConfig, region_index: usize, rng: &mut ChaCha8Rng) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    for year in cfg.first_year..=cfg.last_year {
        for month in 1..=12u32 {
            let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
            if (6..=9).contains(&month) {
                let mut d = first + Duration::days(((region_index * 2) % 7) as i64);
                while d.month() == month {
                    out.push(d);
                    d += Duration::days(7);
                }
            } else {
                out.push(first + Duration::days(rng.random_range(2..=22)));
            }
        }
    }
    out
}

impl SyntheticDataset {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let catalog = cfg.catalog()?;
        let names = catalog.names();
        let site = Site::default();
        let start = cfg.start_date();
        let n_days = (cfg.end_date() - start).num_days() as usize + 1;
        let dates: Vec<NaiveDate> = (0..n_days).map(|i| start + Duration::days(i as i64)).collect();
        let mut regions = cfg.regions.clone();
        regions.sort();
        regions.dedup();

        let mut offsets_rng = stream_rng(cfg.seed, 0);
        let mut offsets: BTreeMap<(Region, usize), f64> = BTreeMap::new();
        for (j, d) in catalog.features().iter().enumerate() {
            if let Some(m) = model_for(&d.name) {
                for &r in &regions {
                    let o = if d.source == Source::Hydro { m.region_sd * offsets_rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                    offsets.insert((r, j), o);
                }
            }
        }

        // Shared columns: derived and meteorological.
        let mut shared: Vec<Option<Vec<f64>>> = vec![None; names.len()];
        let mut meteo_rng = stream_rng(cfg.seed, 1);
        for (j, d) in catalog.features().iter().enumerate() {
            match d.source {
                Source::Derived => {
                    let col = dates.iter().map(|&t| derived_value(&d.name, t, site)).collect::<Result<Vec<_>>>()?;
                    shared[j] = Some(col);
                }
                Source::Meteo => {
                    let m = model_for(&d.name).expect("meteo feature has a model");
                    shared[j] = Some(simulate(&m, &d.name, &dates, 0.0, cfg.noise_scale, &mut meteo_rng));
                }
                Source::Hydro => {}
            }
        }

        let mut complete = BTreeMap::new();
        for (ri, &r) in regions.iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, 10 + ri as u64);
            let mut values = Array2::from_elem((n_days, names.len()), None);
            for (j, d) in catalog.features().iter().enumerate() {
                let col = match &shared[j] {
                    Some(c) => c.clone(),
                    None => {
                        let m = model_for(&d.name).expect("hydro feature has a model");
                        simulate(&m, &d.name, &dates, offsets[&(r, j)], cfg.noise_scale, &mut rng)
                    }
                };
                for (i, v) in col.into_iter().enumerate() {
                    values[[i, j]] = Some(v);
                }
            }
            complete.insert(r, TimeSeriesTable::new(Some(r), start, names.clone(), values)?);
        }

        let observed = inject_missingness(cfg, &catalog, &complete)?;

        // Samples and labels.
        let mut unique: Vec<(Region, NaiveDate)> = Vec::new();
        for (ri, &r) in regions.iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, 40 + ri as u64);
            for v in visit_dates(cfg, ri, &mut rng) {
                for k in 0..cfg.samples_per_visit {
                    unique.push((r, v + Duration::days(k as i64)));
                }
            }
        }
        unique.sort();
        unique.dedup();

        let driver_idx: Vec<(usize, f64)> = cfg
            .drivers
            .iter()
            .map(|d| (catalog.index_of(&d.feature).unwrap(), d.coefficient))
            .collect();
        let mut trailing = Array2::<f64>::zeros((unique.len(), driver_idx.len()));
        for (i, (r, date)) in unique.iter().enumerate() {
            let t = &complete[r];
            let last = t.day_index(*date).expect("sample inside the grid");
            for (k, &(j, _)) in driver_idx.iter().enumerate() {
                let sum: f64 = (last - WINDOW_DAYS..last).map(|d| t.values()[[d, j]].unwrap()).sum();
                trailing[[i, k]] = sum / WINDOW_DAYS as f64;
            }
        }
        let mut label_rng = stream_rng(cfg.seed, 50);
        let latent_noise = Normal::new(0.0, cfg.label_noise).map_err(|e| Error::Config(e.to_string()))?;
        let mut drive = vec![0.0; unique.len()];
        let scores: Vec<f64> = (0..unique.len())
            .map(|i| {
                let mut eta = 0.0;
                for (k, &(_, c)) in driver_idx.iter().enumerate() {
                    let col = trailing.column(k);
                    let mean = col.mean().unwrap_or(0.0);
                    let sd = col.std(0.0);
                    if c != 0.0 && sd > 0.0 {
                        eta += c * (trailing[[i, k]] - mean) / sd;
                    }
                }
                drive[i] = eta;
                eta += latent_noise.sample(&mut label_rng);
                let p: f64 = label_rng.random_range(f64::EPSILON..1.0);
                eta + (p / (1.0 - p)).ln()
            })
            .collect();
        let target = (cfg.prevalence * unique.len() as f64).round() as usize;
        let intercept = calibrate_intercept(&scores, target)?;

        let risk = unique
            .iter()
            .zip(&drive)
            .map(|(&(r, date), e)| (SampleRecord::new(r, date, Concentration::NotDetected).id(), intercept + e))
            .collect();
        let mut samples = Vec::with_capacity(unique.len());
        let mut dup_rng = stream_rng(cfg.seed, 60);
        let mut n_positive = 0;
        for (i, &(r, date)) in unique.iter().enumerate() {
            let u = intercept + scores[i];
            let conc = concentration(u);
            let rec = SampleRecord::new(r, date, conc);
            n_positive += usize::from(rec.above_al);
            samples.push(rec);
            if dup_rng.random_bool(cfg.duplicate_rate) {
                let lower = match conc {
                    Concentration::Detected(v) if v * 0.5 >= 10.0 => Concentration::Detected(round1(v * 0.5)),
                    _ => Concentration::NotDetected,
                };
                samples.push(SampleRecord::new(r, date, lower));
            }
        }

        let truth = GroundTruth {
            drivers: cfg.drivers.iter().filter(|d| d.coefficient != 0.0).cloned().collect(),
            intercept,
            target_prevalence: cfg.prevalence,
            realized_prevalence: n_positive as f64 / unique.len() as f64,
            n_samples: unique.len(),
            n_positive,
            seed: cfg.seed,
        };

        let mut stations = BTreeMap::new();
        for &r in &regions {
            for s in station_ids(r) {
                stations.insert(s, r);
            }
        }
        let region_config = RegionConfig {
            stations,
            catalog: Some(CatalogSelection { features: names.clone() }),
            ..RegionConfig::default()
        };

        Ok(Self { config: cfg.clone(), catalog, region_config, complete, observed, samples, truth, risk })
    }

    /// Writes meteo, hydro, samples, region config and ground truth into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        self.write_meteo(&dir.join(METEO_FILE))?;
        self.write_hydro(&dir.join(HYDRO_FILE))?;
        write_samples(&dir.join(SAMPLES_FILE), &self.samples)?;
        let regions = dir.join(REGIONS_FILE);
        std::fs::write(&regions, self.region_config.to_toml_string()?).map_err(Error::io(&regions))?;
        let truth = dir.join(TRUTH_FILE);
        let json = serde_json::to_string_pretty(&self.truth)? + "\n";
        std::fs::write(&truth, json).map_err(Error::io(&truth))
    }

    fn write_meteo(&self, path: &Path) -> Result<()> {
        let cols: Vec<(usize, &'static crate::ingest::meteo::MeteoCode)> = self
            .catalog
            .indices_by_source(Source::Meteo)
            .into_iter()
            .map(|j| (j, code_for_feature(&self.catalog.get(j).name).expect("meteo feature has a code")))
            .collect();
        let station = &self.region_config.site.meteo_station;
        let Some(table) = self.observed.values().next() else { return Ok(()) };
        let mut out = String::from("STN,YYYYMMDD");
        for (_, c) in &cols {
            write!(out, ",{}", c.code).unwrap();
        }
        out.push('\n');
        for d in 0..table.n_days() {
            write!(out, "{station},{}", table.date(d).format("%Y%m%d")).unwrap();
            for (j, c) in &cols {
                match table.values()[[d, *j]] {
                    Some(v) => write!(out, ",{}", c.from_si(v)).unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(Error::io(path))
    }

    fn write_hydro(&self, path: &Path) -> Result<()> {
        let hydro = self.catalog.indices_by_source(Source::Hydro);
        let mut out = String::from("station,location,date,feature,value,unit\n");
        for (ri, (r, table)) in self.observed.iter().enumerate() {
            let stations = station_ids(*r);
            let mut rng = stream_rng(self.config.seed, 70 + ri as u64);
            for d in 0..table.n_days() {
                let date = table.date(d).format("%Y-%m-%d");
                for &j in &hydro {
                    let Some(v) = table.values()[[d, j]] else { continue };
                    let desc = self.catalog.get(j);
                    let m = model_for(&desc.name).expect("hydro feature has a model");
                    let dec = m.decimals as usize;
                    if stations.len() == 2 {
                        // Two readings symmetric around the region value.
                        let step = 10f64.powi(-(m.decimals as i32));
                        let delta = step * f64::from(rng.random_range(0..=3u8));
                        for (s, x) in stations.iter().zip([v + delta, v - delta]) {
                            writeln!(out, "{s},{r}01,{date},{},{x:.dec$},{}", desc.name, desc.units).unwrap();
                        }
                    } else {
                        writeln!(out, "{},{r}01,{date},{},{v:.dec$},{}", stations[0], desc.name, desc.units).unwrap();
                    }
                }
            }
        }
        std::fs::write(path, out).map_err(Error::io(path))
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Maps a latent margin to a written concentration. Rounding to 0.1 never
/// moves a value across the action limit.
fn concentration(u: f64) -> Concentration {
    let c = round1(AL_UG_PER_KG * (CONCENTRATION_SCALE * u).exp());
    let c = if u > 0.0 { c.max(AL_UG_PER_KG + 0.1) } else { c.min(AL_UG_PER_KG - 0.1) };
    if c < 10.0 {
        Concentration::NotDetected
    } else {
        Concentration::Detected(c)
    }
}

/// Bisection for the intercept `b` with exactly `target` scores satisfying `b + s > 0`.
fn calibrate_intercept(scores: &[f64], target: usize) -> Result<f64> {
    let n = scores.len();
    if target == 0 || target >= n {
        return Err(Error::InfeasiblePrevalence(format!("{target} positives out of {n} samples")));
    }
    let count = |b: f64| scores.iter().filter(|&&s| b + s > 0.0).count();
    let spread = scores.iter().fold(0.0f64, |m, s| m.max(s.abs())) + 1.0;
    let (mut lo, mut hi) = (-spread, spread);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match count(mid).cmp(&target) {
            std::cmp::Ordering::Equal => return Ok(mid),
            std::cmp::Ordering::Less => lo = mid,
            std::cmp::Ordering::Greater => hi = mid,
        }
    }
    Err(Error::InfeasiblePrevalence(format!(
        "no intercept gives exactly {target} of {n} positives (tied latent scores)"
    )))
}

fn inject_missingness(
    cfg: &SynthConfig,
    catalog: &FeatureCatalog,
    complete: &BTreeMap<Region, TimeSeriesTable>,
) -> Result<BTreeMap<Region, TimeSeriesTable>> {
    let miss = &cfg.missingness;
    let mut meteo_rng = stream_rng(cfg.seed, 20);
    let Some(first) = complete.values().next() else { return Ok(BTreeMap::new()) };
    let n_days = first.n_days();
    let meteo_cols = catalog.indices_by_source(Source::Meteo);
    let meteo_mask: Vec<Vec<bool>> = (0..n_days)
        .map(|_| meteo_cols.iter().map(|_| meteo_rng.random_bool(miss.knn_meteo_rate)).collect())
        .collect();

    let mut out = BTreeMap::new();
    for (ri, (r, t)) in complete.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, 30 + ri as u64);
        let mut values = t.values().clone();
        for (d, row) in meteo_mask.iter().enumerate() {
            for (k, &j) in meteo_cols.iter().enumerate() {
                if row[k] {
                    values[[d, j]] = None;
                }
            }
        }
        for (j, desc) in catalog.features().iter().enumerate() {
            if desc.source != Source::Hydro {
                continue;
            }
            if miss.absent.as_ref().is_some_and(|(ar, af)| ar == r && *af == desc.name) {
                values.column_mut(j).fill(None);
                continue;
            }
            if desc.imputation_policy == ImputationPolicy::ForwardFill && miss.monthly_sparse {
                // One observation per month on a random day.
                let mut keep_day = None;
                let mut month = None;
                for d in 0..n_days {
                    let date = t.date(d);
                    if month != Some((date.year(), date.month())) {
                        month = Some((date.year(), date.month()));
                        keep_day = Some(rng.random_range(1..=27u32));
                    }
                    if Some(date.day()) != keep_day {
                        values[[d, j]] = None;
                    }
                }
            } else {
                for d in 0..n_days {
                    if rng.random_bool(miss.knn_hydro_rate) {
                        values[[d, j]] = None;
                    }
                }
            }
        }
        out.insert(*r, TimeSeriesTable::new(Some(*r), t.start(), t.features().to_vec(), values)?);
    }
    Ok(out)
}
