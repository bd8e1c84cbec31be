//! `pathflow <train|eval|gradcheck|compare>`.
//!
//! Exit codes: 0 success, 1 runtime or check failure, 2 usage or config error.

pub mod config;
pub mod gradcheck;
pub mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::cnf::Estimator;
use crate::error::Error;
use crate::estimators;
use crate::trainer::{self, Checkpoint, TrainConfig};
use config::RunConfig;
use output::{MetricsWriter, RunManifest};

const DEFAULT_EVAL_SAMPLES: usize = 10_000;
/// Stream family for `eval`, disjoint from training and in-training evaluation.
const CLI_EVAL_STREAM_BASE: u64 = 3 << 61;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Train,
    Eval,
    Gradcheck,
    Compare,
}

#[derive(Debug, Parser)]
#[command(name = "pathflow", version, about = "Path-gradient training of continuous normalizing flows")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (train, compare).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of evaluation samples (eval).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Checkpoint to evaluate (eval).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidGrid(_) | Error::DimensionMismatch { .. } => Failure::usage(e.to_string()),
            other => Failure::runtime(other.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Runs one command, printing diagnostics to stderr, and returns the exit code.
pub fn run(args: &Args) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("pathflow: {}", f.message);
            f.code
        }
    }
}

fn dispatch(args: &Args) -> CliResult {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    match args.command {
        Command::Train => cmd_train(&cfg, &out_dir(args)),
        Command::Eval => {
            let ck = args.checkpoint.as_deref().ok_or_else(|| Failure::usage("eval requires --checkpoint PATH"))?;
            cmd_eval(&cfg, ck, args.samples.unwrap_or(DEFAULT_EVAL_SAMPLES))
        }
        Command::Gradcheck => cmd_gradcheck(&cfg),
        Command::Compare => cmd_compare(&cfg, &out_dir(args)),
    }
}

fn out_dir(args: &Args) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from("pathflow-out"))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

fn echo(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult {
    let tc = cfg.train_config()?;
    tc.validate()?;
    create_dir(out)?;
    let outputs = ["manifest.json", "metrics.csv", "metrics.jsonl", "iters.csv", "checkpoint.bin"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    let mut manifest = RunManifest::begin("train", tc.seed, echo(cfg), outputs);
    manifest.save(out)?;

    let mut writer = MetricsWriter::create(out)?;
    let mut write_err = None;
    let outcome = trainer::train_with(&tc, |rec| {
        if let Err(e) = writer.write(rec) {
            write_err.get_or_insert(e);
        }
    })?;
    output::write_iters(out, &outcome.history)?;
    Checkpoint { config_hash: tc.model.hash(tc.seed), params: outcome.params.clone(), adam: outcome.adam.clone() }
        .save(&out.join("checkpoint.bin"))?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    match outcome.error {
        None => {
            manifest.finish("ok");
            manifest.save(out)?;
            Ok(())
        }
        Some(e) => {
            manifest.finish("failed");
            manifest.save(out)?;
            Err(Failure::runtime(format!("training aborted: {e}")))
        }
    }
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, n_samples: usize) -> CliResult {
    if n_samples < 2 {
        return Err(Failure::usage(format!("--samples must be at least 2, got {n_samples}")));
    }
    let model = cfg.model();
    let seed = cfg.train.seed;
    let ck = Checkpoint::load(checkpoint).map_err(|e| Failure::usage(e.to_string()))?;
    if ck.config_hash != model.hash(seed) {
        return Err(Failure::usage(format!(
            "checkpoint {} was written for a different model configuration",
            checkpoint.display()
        )));
    }
    let flow = model.initial_flow(seed)?;
    if ck.params.len() != flow.n_params() {
        return Err(Failure::usage("checkpoint parameter count does not match the model"));
    }
    let flow = flow.with_params(&ck.params)?;
    let target = model.target(seed)?;
    let batch = estimators::evaluate_flow(&flow, target.as_ref(), n_samples, seed, CLI_EVAL_STREAM_BASE)?;
    let summary = estimators::summarize(&batch)?;
    let mut json = serde_json::to_value(&summary).expect("summary serializes");
    json["seed"] = seed.into();
    json["exact_log_z"] = target.exact_log_norm().map_or(serde_json::Value::Null, Into::into);
    println!("{json}");
    Ok(())
}

pub fn cmd_gradcheck(cfg: &RunConfig) -> CliResult {
    let results = gradcheck::run_suite(cfg)?;
    print!("{}", gradcheck::render_table(&results));
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} (max_err {:.3e} > {:.0e})", r.name, r.max_err, r.tol))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!("gradcheck failed: {}", failed.join(", "))))
    }
}

pub const SUMMARY_HEADER: &str =
    "seeds,path_final_ess_mean,path_final_ess_sd,total_final_ess_mean,total_final_ess_sd,path_ms_per_iter,total_ms_per_iter,time_ratio,failed_runs";

pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> CliResult {
    let base: TrainConfig = cfg.train_config_with(cfg.train.estimator.unwrap_or(Estimator::Path));
    base.validate()?;
    let seeds = cfg.compare_seeds();
    create_dir(out)?;
    let mut manifest = RunManifest::begin("compare", base.seed, echo(cfg), vec![out.join("summary.csv")]);
    manifest.save(out)?;

    let cmp = trainer::compare_estimators(&base, &seeds)?;
    let mut failures = Vec::new();
    for run in &cmp.runs {
        let dir = out.join(format!("{}-seed{}", run.estimator.name(), run.seed));
        create_dir(&dir)?;
        match &run.outcome {
            Ok(o) => {
                output::write_history(&dir, &o.history)?;
                if let Some(e) = &o.error {
                    failures.push(format!("{} seed {}: {e}", run.estimator.name(), run.seed));
                }
            }
            Err(e) => failures.push(format!("{} seed {}: {e}", run.estimator.name(), run.seed)),
        }
    }

    let s = &cmp.summary;
    let sd = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut w = BufWriter::new(File::create(out.join("summary.csv")).map_err(Error::from)?);
    let row = format!(
        "{},{},{},{},{},{},{},{},{}",
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
        s.path.final_ess_mean,
        sd(s.path.final_ess_sd),
        s.total.final_ess_mean,
        sd(s.total.final_ess_sd),
        s.path.ms_per_iter,
        s.total.ms_per_iter,
        s.time_ratio,
        s.path.failed_runs + s.total.failed_runs,
    );
    writeln!(w, "{SUMMARY_HEADER}\n{row}").and_then(|_| w.flush()).map_err(Error::from)?;
    println!("{SUMMARY_HEADER}\n{row}");

    manifest.finish(if failures.is_empty() { "ok" } else { "failed" });
    manifest.save(out)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!("runs failed: {}", failures.join("; "))))
    }
}

/// Entry point shared by the binary: parses arguments, applies the thread cap,
/// and runs the command.
pub fn main_entry() -> i32 {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var("PATHFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    run(&args)
}
