//! `ttx`: the contamination-prediction pipeline as subcommands.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on
//! file-system errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use ttx_core::explain::{ExplainMethod, DEFAULT_COALITIONS};
use ttx_core::ingest::{LabelMode, Region};
use ttx_core::model::ModelConfig;
use ttx_core::pipeline::{
    self, EvalSplit, EvaluateArgs, ExplainArgs, ExplainOutcome, ExplainScope, ExplainTarget, IngestInputs,
};
use ttx_core::preprocess::PreprocessConfig;
use ttx_core::synthgen::SynthConfig;

#[derive(Parser, Debug)]
#[command(name = "ttx", version, about = "Explainable LSTM pipeline for TTX contamination prediction")]
struct Cli {
    /// Worker threads for parallel stages; 1 forces single-threaded execution.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset with planted drivers.
    Synth(SynthArgs),
    /// Parse raw meteo, hydro and sample files into region tables.
    Ingest(IngestArgs),
    /// Clip, impute and normalize ingested tables.
    Preprocess(PreprocessArgs),
    /// Train the LSTM classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a held-out split with a frozen checkpoint.
    Evaluate(EvaluateCmd),
    /// Shapley attributions, global or for one sample.
    Explain(ExplainCmd),
    /// Bundle report directories into one folder with an HTML index.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Zero every driver coefficient. Without --config this is the built-in
    /// null dataset, which also takes six samples per visit.
    #[arg(long)]
    null: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// KNMI-style daily station file(s).
    #[arg(long, required = true, num_args = 1..)]
    meteo: Vec<PathBuf>,
    /// Long-format hydrological file(s).
    #[arg(long, required = true, num_args = 1..)]
    hydro: Vec<PathBuf>,
    /// TTX sample file(s): region,date,ttx_ug_per_kg.
    #[arg(long, required = true, num_args = 1..)]
    samples: Vec<PathBuf>,
    /// Region, station and catalog configuration (TOML).
    #[arg(long)]
    regions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Directory written by `ingest`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Preprocessing configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    data: PathBuf,
    /// Model configuration (TOML); the full-size defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// val or test.
    #[arg(long, default_value = "test")]
    split: EvalSplit,
    /// AL (action limit) or LL (legal limit) labels.
    #[arg(long, default_value = "AL")]
    mode: LabelMode,
    /// Leave one region's windows out of the scored set.
    #[arg(long, value_name = "REGION")]
    exclude_region: Option<Region>,
    /// Fixed decision threshold instead of the 90%-sensitivity point.
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
    /// Bootstrap resamples for the AUC interval.
    #[arg(long, default_value_t = ttx_core::evaluate::DEFAULT_RESAMPLES)]
    resamples: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("target").required(true).args(["global", "sample"])))]
#[command(group(ArgGroup::new("estimator").args(["exact", "coalitions"])))]
struct ExplainCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Summaries over every window in the scope.
    #[arg(long)]
    global: bool,
    /// Explain one window, e.g. ESE_2023-06-05.
    #[arg(long, value_name = "ID")]
    sample: Option<String>,
    /// Exact Shapley values (at most 20 features).
    #[arg(long)]
    exact: bool,
    /// Kernel estimator coalition budget.
    #[arg(long, value_name = "N")]
    coalitions: Option<usize>,
    /// Kernel estimator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Windows to explain: all, train, val or test.
    #[arg(long, default_value = "all")]
    split: ExplainScope,
    #[arg(long)]
    report_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report directories written by `evaluate` or `explain`.
    #[arg(long = "from", required = true, num_args = 1..)]
    sources: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_or_default<T: Default>(path: &Option<PathBuf>, load: impl Fn(&std::path::Path) -> ttx_core::Result<T>) -> Result<T> {
    match path {
        Some(p) => load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(T::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, ttx_core::Error::Config("--threads must be at least 1".into()));
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Synth(a) => {
            let mut cfg = match (&a.config, a.null) {
                (None, true) => SynthConfig::null(),
                _ => load_or_default(&a.config, SynthConfig::load)?,
            };
            if a.null {
                for d in &mut cfg.drivers {
                    d.coefficient = 0.0;
                }
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let ds = pipeline::run_synth(&cfg, &a.out)?;
            println!(
                "synth: {} samples, {} positive ({:.1}%), drivers {:?} -> {}",
                ds.truth.n_samples,
                ds.truth.n_positive,
                100.0 * ds.truth.realized_prevalence,
                ds.truth.driver_names(),
                a.out.display()
            );
        }
        Command::Ingest(a) => {
            let inputs = IngestInputs { meteo: a.meteo, hydro: a.hydro, samples: a.samples, regions: a.regions };
            let s = pipeline::run_ingest(&inputs, &a.out)?;
            println!(
                "ingest: {} regions x {} days, {} missing cells, {} samples ({} records) -> {}",
                s.regions.len(),
                s.days,
                s.missing_cells,
                s.samples,
                s.raw_samples,
                a.out.display()
            );
        }
        Command::Preprocess(a) => {
            let cfg = load_or_default(&a.config, PreprocessConfig::load)?;
            let meta = pipeline::run_preprocess(&a.input, &a.out, &cfg)?;
            let r = &meta.report;
            println!(
                "preprocess: clipped {}, forward-filled {}, neighbor-filled {} ({} pairs), knn-filled {} -> {}",
                r.clipped_cells,
                r.forward_filled_cells,
                r.neighbor_filled_cells,
                r.neighbor_filled.len(),
                r.knn_filled_cells,
                a.out.display()
            );
        }
        Command::Train(a) => {
            let mut cfg = load_or_default(&a.config, ModelConfig::load)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let out = pipeline::run_train(&a.data, &cfg, &a.checkpoint)?;
            println!(
                "train: {} epochs, best epoch {} (validation AUC {:.4}), checkpoint sha256 {}",
                out.history.epochs.len(),
                out.history.best_epoch,
                out.history.best_auc(),
                out.checkpoint_sha256
            );
        }
        Command::Evaluate(a) => {
            let args = EvaluateArgs {
                split: a.split,
                mode: a.mode,
                exclude_region: a.exclude_region,
                threshold: a.threshold,
                n_resamples: a.resamples,
                seed: a.seed,
            };
            let out = pipeline::run_evaluate(&a.checkpoint, &a.data, &args, &a.report_dir)?;
            let m = &out.metrics;
            println!(
                "evaluate: n {}, positives {}, AUC {:.4} [{:.4}, {:.4}], threshold {:.4}: sensitivity {:.3}, specificity {:.3}",
                m.n, m.positives, m.auc, m.ci_lo, m.ci_hi, m.confusion.threshold, m.confusion.sensitivity, m.confusion.specificity
            );
        }
        Command::Explain(a) => {
            let method = if a.exact {
                ExplainMethod::Exact
            } else {
                ExplainMethod::Kernel { n_coalitions: a.coalitions.unwrap_or(DEFAULT_COALITIONS), seed: a.seed }
            };
            let target = match a.sample {
                Some(id) => ExplainTarget::Sample(id),
                None => ExplainTarget::Global,
            };
            let args = ExplainArgs { target, method, scope: a.split };
            match pipeline::run_explain(&a.checkpoint, &a.data, &args, &a.report_dir)? {
                ExplainOutcome::Global(g) => {
                    println!("explain: {} windows; top features:", g.attributions.len());
                    for imp in g.importance.iter().take(5) {
                        let p = g.differences.iter().find(|d| d.feature == imp.feature).map_or(f64::NAN, |d| d.p);
                        println!("  {:<24} mean|phi| {:.5}  p {:.3e}", imp.feature, imp.mean_abs, p);
                    }
                }
                ExplainOutcome::Local(l) => {
                    let disagree = l.rows.iter().filter(|r| !r.agrees).count();
                    println!(
                        "explain: {} prediction {:.4}, {} of {} features disagree with the positive-group mean ({} windows)",
                        l.attribution.id,
                        l.attribution.prediction,
                        disagree,
                        l.rows.len(),
                        l.n_positive
                    );
                }
            }
        }
        Command::Report(a) => {
            let index = pipeline::run_report(&a.sources, &a.out)?;
            println!("report: {}", index.display());
        }
    }
    Ok(())
}

/// 2 for file-system failures anywhere in the error chain, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ttx_core::Error>() {
            if e.is_io() {
                return 2;
            }
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
