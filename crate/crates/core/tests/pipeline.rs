use std::path::{Path, PathBuf};

use ttx_core::ingest::LabelMode;
use ttx_core::model::{file_sha256, ModelConfig, TrainedModel};
use ttx_core::pipeline::{self, Dataset, EvalSplit, EvaluateArgs, IngestInputs, RunManifest, SAMPLES_FILE};
use ttx_core::preprocess::{PreprocessConfig, SplitYears};
use ttx_core::synthgen::SynthConfig;
use ttx_core::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_the_built_in_defaults() {
    let dir = configs_dir();
    assert_eq!(SynthConfig::load(&dir.join("synth_default.toml")).unwrap(), SynthConfig::default());
    assert_eq!(ModelConfig::load(&dir.join("model_full.toml")).unwrap(), ModelConfig::default());
    assert_eq!(PreprocessConfig::load(&dir.join("preprocess.toml")).unwrap(), PreprocessConfig::default());
    let small = ModelConfig::load(&dir.join("model_small.toml")).unwrap();
    small.validate().unwrap();
    assert!(small.hidden_dim < ModelConfig::default().hidden_dim);
}

#[test]
fn library_pipeline_on_a_small_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let synth = SynthConfig { first_year: 2021, last_year: 2023, seed: 3, ..Default::default() };
    let pre = PreprocessConfig {
        split: SplitYears { train_first: 2021, train_last: 2021, validation: 2022, test: 2023 },
        ..Default::default()
    };
    let model = ModelConfig {
        lstm_layers: 1,
        hidden_dim: 6,
        head_dims: vec![6, 4, 2],
        max_epochs: 2,
        seed: 4,
        ..Default::default()
    };
    let (raw, ingested, data) = (root.join("raw"), root.join("ingested"), root.join("data"));
    let checkpoint = root.join("ckpt").join("model.json");

    let ds = pipeline::run_synth(&synth, &raw).unwrap();
    let summary = pipeline::run_ingest(&IngestInputs::from_synth_dir(&raw), &ingested).unwrap();
    assert!(summary.samples <= summary.raw_samples);
    assert_eq!(summary.raw_samples, ds.samples.len());
    let meta = pipeline::run_preprocess(&ingested, &data, &pre).unwrap();
    assert_eq!(meta.split, pre.split);

    let trained = pipeline::run_train(&data, &model, &checkpoint).unwrap();
    assert_eq!(trained.checkpoint_sha256, file_sha256(&checkpoint).unwrap());
    let reloaded = TrainedModel::load(&checkpoint).unwrap();
    let dataset = Dataset::load(&data).unwrap();
    let (split, _) = dataset.split(LabelMode::AL).unwrap();
    let schema = dataset.schema();
    assert_eq!(
        reloaded.predict_all(&schema, &split.test).unwrap(),
        trained.model.predict_all(&schema, &split.test).unwrap()
    );

    let args = EvaluateArgs {
        split: EvalSplit::Validation,
        mode: LabelMode::AL,
        exclude_region: None,
        threshold: Some(0.5),
        n_resamples: 100,
        seed: 1,
    };
    let report = root.join("eval");
    let out = pipeline::run_evaluate(&checkpoint, &data, &args, &report).unwrap();
    assert_eq!(out.metrics.n, split.validation.len());
    assert_eq!(out.checkpoint_sha256.0, out.checkpoint_sha256.1);
    assert!((out.metrics.confusion.threshold - 0.5).abs() < 1e-15);
    let manifest = RunManifest::load(&report.join(RunManifest::file_name("evaluate"))).unwrap();
    let key = checkpoint.display().to_string();
    assert_eq!(manifest.inputs.get(&key), Some(&trained.checkpoint_sha256));

    // Edited inputs are refused rather than silently re-read.
    let samples = data.join(SAMPLES_FILE);
    let mut text = std::fs::read_to_string(&samples).unwrap();
    text.push_str("\n");
    std::fs::write(&samples, text).unwrap();
    assert!(matches!(Dataset::load(&data), Err(Error::Invalid(_))));
}
