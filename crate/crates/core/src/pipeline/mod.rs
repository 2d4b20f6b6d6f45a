//! File-based stage runners shared by the command line and the tests.
//!
//! Each stage reads the artifacts of the previous one, validates their
//! hashes, writes its own artifacts into a directory and records a
//! [`RunManifest`] next to them.

mod manifest;

pub use manifest::{config_hash, RunManifest, TOOL_VERSION};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::report::{roc_svg, write_metrics_csv, write_roc_points, MetricRow, RocSeries};
use crate::evaluate::{bootstrap_roc_band, evaluate_scores, EvalMetrics, EvalOptions, DEFAULT_RESAMPLES};
use crate::explain::report::{global_svg, local_svg, write_global_csv, write_local_csv};
use crate::explain::{
    explain_window, explain_windows, global_importance, group_difference, local_report, mean_attribution, Attribution,
    ExplainMethod, FeatureImportance, GroupDifference, LocalRow,
};
use crate::ingest::catalog::FeatureCatalog;
use crate::ingest::hydro::parse_hydro_files;
use crate::ingest::meteo::parse_meteo_files;
use crate::ingest::samples::{deduplicate, parse_samples, write_samples, LabelMode, Region, SampleRecord};
use crate::ingest::table::{read_tables, write_tables, TimeSeriesTable};
use crate::ingest::{assemble_region_tables, RegionConfig};
use crate::model::{file_sha256, train, InputSchema, Model, ModelConfig, TrainedModel, TrainingHistory};
use crate::preprocess::{
    build_windows, preprocess_tables, split_by_year, DatasetSplit, FeatureWindow, NormalizationBounds, PreprocessConfig,
    PreprocessReport, SplitYears, WindowReport,
};
use crate::synthgen::{SynthConfig, SyntheticDataset};

pub const TABLES_FILE: &str = "tables.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REGIONS_FILE: &str = "regions.toml";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const SYNTH_CONFIG_FILE: &str = "synth_config.toml";
pub const HISTORY_FILE: &str = "training_history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ROC_POINTS_FILE: &str = "roc_points.csv";
pub const ROC_SVG_FILE: &str = "roc.svg";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SHAP_GLOBAL_CSV: &str = "shap_global.csv";
pub const SHAP_GLOBAL_SVG: &str = "shap_global.svg";
pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
pub const REPORT_INDEX_FILE: &str = "index.html";

/// Probability cut used to form predicted-positive and predicted-negative
/// groups in global attribution summaries.
pub const PREDICTED_POSITIVE_CUT: f64 = 0.5;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::io(path))
}

// ---------------------------------------------------------------- synth

pub fn run_synth(cfg: &SynthConfig, out: &Path) -> Result<SyntheticDataset> {
    let mut m = RunManifest::begin("synth");
    m.config(cfg)?;
    m.seed = Some(cfg.seed);
    let ds = SyntheticDataset::generate(cfg)?;
    ds.write(out)?;
    let cfg_path = out.join(SYNTH_CONFIG_FILE);
    write_text(&cfg_path, &cfg.to_toml_string()?)?;
    for f in [
        crate::synthgen::METEO_FILE,
        crate::synthgen::HYDRO_FILE,
        crate::synthgen::SAMPLES_FILE,
        crate::synthgen::REGIONS_FILE,
        crate::synthgen::TRUTH_FILE,
        SYNTH_CONFIG_FILE,
    ] {
        m.output(&out.join(f));
    }
    m.finish(out)?;
    Ok(ds)
}

// ---------------------------------------------------------------- ingest

#[derive(Clone, Debug, Default)]
pub struct IngestInputs {
    pub meteo: Vec<PathBuf>,
    pub hydro: Vec<PathBuf>,
    pub samples: Vec<PathBuf>,
    pub regions: PathBuf,
}

impl IngestInputs {
    /// The four files [`run_synth`] writes into `dir`.
    pub fn from_synth_dir(dir: &Path) -> Self {
        Self {
            meteo: vec![dir.join(crate::synthgen::METEO_FILE)],
            hydro: vec![dir.join(crate::synthgen::HYDRO_FILE)],
            samples: vec![dir.join(crate::synthgen::SAMPLES_FILE)],
            regions: dir.join(crate::synthgen::REGIONS_FILE),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub catalog_hash: String,
    pub regions: Vec<Region>,
    pub days: usize,
    pub missing_cells: usize,
    pub raw_samples: usize,
    pub samples: usize,
    pub ignored_meteo_columns: Vec<String>,
    pub ignored_hydro_features: Vec<String>,
}

pub fn run_ingest(inputs: &IngestInputs, out: &Path) -> Result<IngestSummary> {
    if inputs.meteo.is_empty() || inputs.hydro.is_empty() || inputs.samples.is_empty() {
        return Err(Error::Config("ingest needs at least one meteo, hydro and samples file".into()));
    }
    let mut m = RunManifest::begin("ingest");
    for p in inputs.meteo.iter().chain(&inputs.hydro).chain(&inputs.samples).chain([&inputs.regions]) {
        m.input(p)?;
    }
    let rc = RegionConfig::load(&inputs.regions)?;
    m.config(&rc)?;
    let catalog = rc.catalog()?;
    let meteo = parse_meteo_files(&inputs.meteo, &rc.site.meteo_station, &catalog)?;
    let hydro = parse_hydro_files(&inputs.hydro, &rc, &catalog)?;
    let regions = rc.regions();
    let tables = assemble_region_tables(&catalog, &meteo.table, &hydro.tables, &regions, rc.site.site())?;
    let mut raw = Vec::new();
    for p in &inputs.samples {
        raw.extend(parse_samples(p)?);
    }
    let samples = deduplicate(&raw);
    if samples.len() < raw.len() {
        log::info!("ingest: merged {} duplicate sample record(s)", raw.len() - samples.len());
    }

    create_dir(out)?;
    let tables_path = out.join(TABLES_FILE);
    write_tables(&tables_path, &tables)?;
    let samples_path = out.join(SAMPLES_FILE);
    write_samples(&samples_path, &samples)?;
    let regions_path = out.join(REGIONS_FILE);
    write_text(&regions_path, &rc.to_toml_string()?)?;
    let summary = IngestSummary {
        catalog_hash: catalog.hash().to_hex(),
        regions: tables.keys().copied().collect(),
        days: tables.values().next().map_or(0, TimeSeriesTable::n_days),
        missing_cells: tables.values().map(TimeSeriesTable::missing_count).sum(),
        raw_samples: raw.len(),
        samples: samples.len(),
        ignored_meteo_columns: meteo.ignored_columns,
        ignored_hydro_features: hydro.ignored_features,
    };
    let summary_path = out.join(INGEST_SUMMARY_FILE);
    write_text(&summary_path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    for p in [&tables_path, &samples_path, &regions_path, &summary_path] {
        m.output(p);
    }
    m.finish(out)?;
    Ok(summary)
}

// ---------------------------------------------------------------- preprocess

/// Self-description of a preprocessed dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub tool_version: String,
    pub catalog: FeatureCatalog,
    pub catalog_hash: String,
    pub bounds: NormalizationBounds,
    pub bounds_hash: String,
    pub split: SplitYears,
    pub preprocess: PreprocessConfig,
    pub report: PreprocessReport,
    pub tables_sha256: String,
    pub samples_sha256: String,
}

impl DatasetMeta {
    pub fn schema(&self) -> InputSchema {
        InputSchema::new(&self.catalog, &self.bounds)
    }
}

pub fn run_preprocess(input: &Path, out: &Path, cfg: &PreprocessConfig) -> Result<DatasetMeta> {
    let mut m = RunManifest::begin("preprocess");
    m.config(cfg)?;
    let tables_in = input.join(TABLES_FILE);
    let samples_in = input.join(SAMPLES_FILE);
    let regions_in = input.join(REGIONS_FILE);
    for p in [&tables_in, &samples_in, &regions_in] {
        m.input(p)?;
    }
    let rc = RegionConfig::load(&regions_in)?;
    let catalog = rc.catalog()?;
    let tables = read_tables(&tables_in)?;
    let samples = parse_samples(&samples_in)?;
    let pre = preprocess_tables(&tables, &catalog, &rc.neighbors, cfg)?;

    create_dir(out)?;
    let tables_path = out.join(TABLES_FILE);
    write_tables(&tables_path, &pre.tables)?;
    let samples_path = out.join(SAMPLES_FILE);
    write_samples(&samples_path, &samples)?;
    let regions_path = out.join(REGIONS_FILE);
    write_text(&regions_path, &rc.to_toml_string()?)?;
    let meta = DatasetMeta {
        tool_version: TOOL_VERSION.to_string(),
        catalog_hash: catalog.hash().to_hex(),
        catalog,
        bounds_hash: pre.bounds.hash_hex(),
        bounds: pre.bounds,
        split: cfg.split,
        preprocess: cfg.clone(),
        report: pre.report,
        tables_sha256: file_sha256(&tables_path)?,
        samples_sha256: file_sha256(&samples_path)?,
    };
    let meta_path = out.join(DATASET_FILE);
    write_text(&meta_path, &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    for p in [&tables_path, &samples_path, &regions_path, &meta_path] {
        m.output(p);
    }
    m.finish(out)?;
    Ok(meta)
}

/// A preprocessed dataset directory, loaded and verified.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub meta: DatasetMeta,
    pub tables: BTreeMap<Region, TimeSeriesTable>,
    pub samples: Vec<SampleRecord>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(DATASET_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(Error::io(&meta_path))?;
        let meta: DatasetMeta = serde_json::from_str(&text)?;
        let found_catalog = meta.catalog.hash().to_hex();
        if found_catalog != meta.catalog_hash {
            return Err(Error::CatalogMismatch { expected: meta.catalog_hash.clone(), found: found_catalog });
        }
        let found_bounds = meta.bounds.hash_hex();
        if found_bounds != meta.bounds_hash {
            return Err(Error::BoundsMismatch { expected: meta.bounds_hash.clone(), found: found_bounds });
        }
        let tables_path = dir.join(TABLES_FILE);
        let samples_path = dir.join(SAMPLES_FILE);
        for (path, want) in [(&tables_path, &meta.tables_sha256), (&samples_path, &meta.samples_sha256)] {
            let got = file_sha256(path)?;
            if &got != want {
                return Err(Error::Invalid(format!("{} changed since preprocessing (sha256 {got}, expected {want})", path.display())));
            }
        }
        let tables = read_tables(&tables_path)?;
        let names = meta.catalog.names();
        for (r, t) in &tables {
            if t.features() != names.as_slice() {
                return Err(Error::Shape(format!("table for {r} does not follow the dataset catalog")));
            }
        }
        let samples = parse_samples(&samples_path)?;
        Ok(Self { dir: dir.to_path_buf(), meta, tables, samples })
    }

    pub fn schema(&self) -> InputSchema {
        self.meta.schema()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.catalog.names()
    }

    /// Windows labelled under `mode` and split by year.
    pub fn split(&self, mode: LabelMode) -> Result<(DatasetSplit, WindowReport)> {
        let (windows, report) = build_windows(&self.samples, &self.tables, mode)?;
        Ok((split_by_year(windows, self.meta.split), report))
    }
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: TrainingHistory,
    pub checkpoint_sha256: String,
}

/// Trains on the dataset's training years, selects on its validation year
/// and writes the checkpoint plus `training_history.csv` beside it.
pub fn run_train(data: &Path, cfg: &ModelConfig, checkpoint: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut m = RunManifest::begin("train");
    m.config(cfg)?;
    m.seed = Some(cfg.seed);
    let ds = Dataset::load(data)?;
    for f in [DATASET_FILE, TABLES_FILE, SAMPLES_FILE] {
        m.input(&data.join(f))?;
    }
    let (split, report) = ds.split(cfg.label_mode)?;
    let (ntr, nva, nte) = split.sizes();
    let (ptr, pva, pte) = split.positives();
    log::info!("train: windows train {ntr} ({ptr} positive), validation {nva} ({pva}), test {nte} ({pte}); {} dropped", report.dropped());
    let model = Model::new(cfg, ds.meta.catalog.len())?;
    let (model, history) = train(model, &split)?;
    let trained = TrainedModel::new(model, ds.meta.catalog.clone(), ds.meta.bounds.clone(), &split.train, history.best_epoch)?;

    let dir = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(dir)?;
    trained.save(checkpoint)?;
    let history_path = dir.join(HISTORY_FILE);
    history.write_csv(&history_path)?;
    m.param("best_epoch", history.best_epoch).param("best_val_auc", history.best_auc());
    m.output(checkpoint).output(&history_path);
    m.finish(dir)?;
    Ok(TrainOutcome { checkpoint_sha256: file_sha256(checkpoint)?, model: trained, history })
}

// ---------------------------------------------------------------- evaluate

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalSplit {
    Validation,
    Test,
}

impl FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "val" | "validation" => Ok(EvalSplit::Validation),
            "test" => Ok(EvalSplit::Test),
            other => Err(Error::Invalid(format!("unknown split {other:?} (expected val or test)"))),
        }
    }
}

impl std::fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalSplit::Validation => "val",
            EvalSplit::Test => "test",
        })
    }
}

fn pick(split: &DatasetSplit, which: EvalSplit) -> &[FeatureWindow] {
    match which {
        EvalSplit::Validation => &split.validation,
        EvalSplit::Test => &split.test,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    pub split: EvalSplit,
    pub mode: LabelMode,
    pub exclude_region: Option<Region>,
    pub threshold: Option<f64>,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for EvaluateArgs {
    fn default() -> Self {
        Self {
            split: EvalSplit::Test,
            mode: LabelMode::AL,
            exclude_region: None,
            threshold: None,
            n_resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvaluateOutcome {
    pub metrics: EvalMetrics,
    pub scores: Vec<f64>,
    pub windows: Vec<FeatureWindow>,
    /// Checkpoint hash before and after the run; evaluation never writes it.
    pub checkpoint_sha256: (String, String),
}

/// Scores one split with a frozen checkpoint. Label mode and region
/// exclusion only change which labels and windows are scored.
pub fn run_evaluate(checkpoint: &Path, data: &Path, args: &EvaluateArgs, report_dir: &Path) -> Result<EvaluateOutcome> {
    let mut m = RunManifest::begin("evaluate");
    m.config(args)?;
    m.seed = Some(args.seed);
    let before = file_sha256(checkpoint)?;
    m.input(checkpoint)?;
    for f in [DATASET_FILE, TABLES_FILE, SAMPLES_FILE] {
        m.input(&data.join(f))?;
    }
    let model = TrainedModel::load(checkpoint)?;
    let ds = Dataset::load(data)?;
    model.check_schema(&ds.schema())?;
    let (split, _) = ds.split(args.mode)?;
    let windows: Vec<FeatureWindow> = pick(&split, args.split)
        .iter()
        .filter(|w| Some(w.sample.region) != args.exclude_region)
        .cloned()
        .collect();
    let scores = model.predict_all(&ds.schema(), &windows)?;
    let labels: Vec<bool> = windows.iter().map(|w| w.label).collect();
    let opts = EvalOptions { threshold: args.threshold, n_resamples: args.n_resamples, seed: args.seed, ..EvalOptions::default() };
    let metrics = evaluate_scores(&scores, &labels, &opts)?;
    let band = bootstrap_roc_band(&scores, &labels, args.n_resamples.min(2000), args.seed, 50)?;

    create_dir(report_dir)?;
    let metrics_path = report_dir.join(METRICS_FILE);
    write_metrics_csv(&metrics_path, &metrics.rows())?;
    let curve = metrics.curve.as_ref().expect("evaluate_scores keeps the curve");
    let mut name = format!("{} {}", args.split, args.mode);
    if let Some(r) = args.exclude_region {
        write!(name, " without {r}").unwrap();
    }
    let series = [RocSeries {
        name,
        curve,
        auc: metrics.auc,
        band: Some(&band),
        operating_point: Some(metrics.operating_point),
        dotted: false,
    }];
    let roc_path = report_dir.join(ROC_POINTS_FILE);
    write_roc_points(&roc_path, &series)?;
    let svg_path = report_dir.join(ROC_SVG_FILE);
    write_text(&svg_path, &roc_svg(&series))?;
    let pred_path = report_dir.join(PREDICTIONS_FILE);
    write_predictions(&pred_path, &windows, &scores)?;

    let after = file_sha256(checkpoint)?;
    if after != before {
        return Err(Error::Invalid("checkpoint changed during evaluation".into()));
    }
    for p in [&metrics_path, &roc_path, &svg_path, &pred_path] {
        m.output(p);
    }
    m.finish(report_dir)?;
    Ok(EvaluateOutcome { metrics, scores, windows, checkpoint_sha256: (before, after) })
}

fn write_predictions(path: &Path, windows: &[FeatureWindow], scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["id", "region", "date", "label", "probability"]).map_err(Error::csv(path))?;
    for (win, s) in windows.iter().zip(scores) {
        w.write_record([
            win.id(),
            win.sample.region.to_string(),
            win.sample.date.format("%Y-%m-%d").to_string(),
            u8::from(win.label).to_string(),
            s.to_string(),
        ])
        .map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

// ---------------------------------------------------------------- explain

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplainTarget {
    Global,
    Sample(String),
}

/// Which windows attributions are computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplainScope {
    #[default]
    All,
    Train,
    Validation,
    Test,
}

impl FromStr for ExplainScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(ExplainScope::All),
            "train" => Ok(ExplainScope::Train),
            "val" | "validation" => Ok(ExplainScope::Validation),
            "test" => Ok(ExplainScope::Test),
            other => Err(Error::Invalid(format!("unknown scope {other:?} (expected all, train, val or test)"))),
        }
    }
}

impl ExplainScope {
    fn windows(self, split: &DatasetSplit) -> Vec<FeatureWindow> {
        match self {
            ExplainScope::All => split.train.iter().chain(&split.validation).chain(&split.test).cloned().collect(),
            ExplainScope::Train => split.train.clone(),
            ExplainScope::Validation => split.validation.clone(),
            ExplainScope::Test => split.test.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainArgs {
    pub target: ExplainTarget,
    pub method: ExplainMethod,
    pub scope: ExplainScope,
}

#[derive(Clone, Debug)]
pub struct GlobalExplanation {
    pub attributions: Vec<Attribution>,
    pub importance: Vec<FeatureImportance>,
    pub differences: Vec<GroupDifference>,
}

#[derive(Clone, Debug)]
pub struct LocalExplanation {
    pub attribution: Attribution,
    pub rows: Vec<LocalRow>,
    /// Positive-labelled windows the comparison mean was taken over.
    pub n_positive: usize,
}

#[derive(Clone, Debug)]
pub enum ExplainOutcome {
    Global(GlobalExplanation),
    Local(LocalExplanation),
}

/// File-name-safe form of a window id.
pub fn sanitize_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Global summaries over a scope, or one window against the mean
/// attribution of the scope's positive windows. Labels are action-limit labels.
pub fn run_explain(checkpoint: &Path, data: &Path, args: &ExplainArgs, report_dir: &Path) -> Result<ExplainOutcome> {
    let mut m = RunManifest::begin("explain");
    m.config(args)?;
    if let ExplainMethod::Kernel { seed, .. } = args.method {
        m.seed = Some(seed);
    }
    m.input(checkpoint)?;
    for f in [DATASET_FILE, TABLES_FILE, SAMPLES_FILE] {
        m.input(&data.join(f))?;
    }
    let model = TrainedModel::load(checkpoint)?;
    let ds = Dataset::load(data)?;
    let schema = ds.schema();
    model.check_schema(&schema)?;
    let features = ds.feature_names();
    let (split, _) = ds.split(LabelMode::AL)?;
    let windows = args.scope.windows(&split);
    create_dir(report_dir)?;

    let outcome = match &args.target {
        ExplainTarget::Global => {
            if windows.is_empty() {
                return Err(Error::Invalid("no windows in the requested scope".into()));
            }
            let attributions = explain_windows(&model, &schema, &windows, args.method)?;
            let labels: Vec<bool> = windows.iter().map(|w| w.label).collect();
            let importance = global_importance(&features, &attributions, PREDICTED_POSITIVE_CUT)?;
            let differences = group_difference(&features, &attributions, &labels)?;
            let csv_path = report_dir.join(SHAP_GLOBAL_CSV);
            write_global_csv(&csv_path, &importance, &differences)?;
            let svg_path = report_dir.join(SHAP_GLOBAL_SVG);
            write_text(&svg_path, &global_svg(&importance, &differences))?;
            let attr_path = report_dir.join(ATTRIBUTIONS_FILE);
            write_attributions(&attr_path, &features, &attributions)?;
            m.output(&csv_path).output(&svg_path).output(&attr_path);
            ExplainOutcome::Global(GlobalExplanation { attributions, importance, differences })
        }
        ExplainTarget::Sample(id) => {
            let all = ExplainScope::All.windows(&split);
            let target = all
                .iter()
                .find(|w| &w.id() == id)
                .ok_or_else(|| Error::Invalid(format!("no window with id {id}")))?;
            let positives: Vec<FeatureWindow> = windows.iter().filter(|w| w.label).cloned().collect();
            if positives.is_empty() {
                return Err(Error::SingleClass("local comparison group has no positive windows".into()));
            }
            let attribution = explain_window(&model, &schema, target, args.method)?;
            let pos_attr = explain_windows(&model, &schema, &positives, args.method)?;
            let refs: Vec<&Attribution> = pos_attr.iter().collect();
            let comparison = mean_attribution(&refs)?;
            let rows = local_report(&features, &attribution, &comparison)?;
            let stem = format!("shap_local_{}", sanitize_id(id));
            let csv_path = report_dir.join(format!("{stem}.csv"));
            write_local_csv(&csv_path, &rows)?;
            let svg_path = report_dir.join(format!("{stem}.svg"));
            write_text(&svg_path, &local_svg(id, &rows))?;
            m.output(&csv_path).output(&svg_path);
            ExplainOutcome::Local(LocalExplanation { attribution, rows, n_positive: positives.len() })
        }
    };
    m.finish(report_dir)?;
    Ok(outcome)
}

fn write_attributions(path: &Path, features: &[String], attrs: &[Attribution]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    let mut header = vec!["id".to_string(), "label".into(), "base_value".into(), "prediction".into()];
    header.extend(features.iter().cloned());
    w.write_record(&header).map_err(Error::csv(path))?;
    for a in attrs {
        let mut row = vec![
            a.id.clone(),
            a.label.map(|l| u8::from(l).to_string()).unwrap_or_default(),
            a.base_value.to_string(),
            a.prediction.to_string(),
        ];
        row.extend(a.phi.iter().map(f64::to_string));
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

// ---------------------------------------------------------------- report

/// Gathers the CSV and SVG outputs of report directories into `out` with an
/// HTML index that tabulates every metrics file and embeds every figure.
pub fn run_report(sources: &[PathBuf], out: &Path) -> Result<PathBuf> {
    let mut m = RunManifest::begin("report");
    create_dir(out)?;
    let mut html = String::from("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>TTX report</title></head><body>\n");
    for (k, src) in sources.iter().enumerate() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(src)
            .map_err(Error::io(src))?
            .map(|e| e.map(|e| e.path()).map_err(Error::io(src)))
            .collect::<Result<_>>()?;
        entries.sort();
        let label = src.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("part{k}"));
        let target = out.join(format!("{k:02}_{}", sanitize_id(&label)));
        create_dir(&target)?;
        writeln!(html, "<h2>{}</h2>", crate::evaluate::report::xml_escape(&src.display().to_string())).unwrap();
        for path in entries {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if !matches!(ext, "csv" | "svg" | "json") {
                continue;
            }
            m.input(&path)?;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let dest = target.join(&name);
            std::fs::copy(&path, &dest).map_err(Error::io(&dest))?;
            m.output(&dest);
            let rel = format!("{}/{}", target.file_name().unwrap().to_string_lossy(), name);
            if name == METRICS_FILE {
                html.push_str(&metrics_table(&crate::evaluate::report::read_metrics_csv(&path)?));
            } else if ext == "svg" {
                writeln!(html, "<p><img src=\"{rel}\" alt=\"{name}\"></p>").unwrap();
            } else {
                writeln!(html, "<p><a href=\"{rel}\">{name}</a></p>").unwrap();
            }
        }
    }
    html.push_str("</body></html>\n");
    let index = out.join(REPORT_INDEX_FILE);
    write_text(&index, &html)?;
    m.output(&index);
    m.finish(out)?;
    Ok(index)
}

fn metrics_table(rows: &[MetricRow]) -> String {
    let mut s = String::from("<table border=\"1\" cellpadding=\"3\"><tr><th>metric</th><th>value</th><th>95% CI</th></tr>\n");
    for r in rows {
        let ci = r.ci.map(|(lo, hi)| format!("{lo:.4} to {hi:.4}")).unwrap_or_default();
        writeln!(s, "<tr><td>{}</td><td>{:.6}</td><td>{ci}</td></tr>", r.metric, r.value).unwrap();
    }
    s.push_str("</table>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_scope_names() {
        assert_eq!("val".parse::<EvalSplit>().unwrap(), EvalSplit::Validation);
        assert_eq!("TEST".parse::<EvalSplit>().unwrap(), EvalSplit::Test);
        assert!("train".parse::<EvalSplit>().is_err());
        assert_eq!("all".parse::<ExplainScope>().unwrap(), ExplainScope::All);
        assert_eq!(EvalSplit::Validation.to_string(), "val");
        assert_eq!(sanitize_id("ESM_2023-06-05"), "ESM_2023-06-05");
        assert_eq!(sanitize_id("a/b c"), "a_b_c");
    }
}
