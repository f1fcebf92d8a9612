//! Command-line interface: `gen-data`, `train`, `eval`, `dual-info` and `gradcheck`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    dataset_files, generate_synthetic, load_dataset, read_checkpoint, write_atomic, write_checkpoint, write_dataset,
    write_json, write_matrix, write_report, SyntheticConfig,
};
use crate::diagnostics::{model_suite, op_suite, GradCheckResult};
use crate::error::Error;
use crate::graph::{build_dual_complete, pair_count};
use crate::models::{param_count, ModelKind};
use crate::training::{cross_validate, evaluate_model, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_GRADCHECK: i32 = 5;

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  configuration or input error (bad flags, invalid config, size mismatch)
  3  I/O error
  4  training diverged (non-finite loss or runaway parameters)
  5  gradient check failed";

#[derive(Debug, Parser)]
#[command(name = "stpgsr", version, about = "Brain graph super-resolution on the dual of the target graph", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic LR/HR dataset (CSV matrices plus manifest.json).
    GenData(GenDataArgs),
    /// Cross-validate one model on a dataset; writes checkpoints, histories and reports.
    Train(TrainArgs),
    /// Predict and score a dataset with a checkpoint.
    Eval(EvalArgs),
    /// Print size, degree and density of the dual of the complete graph on n nodes.
    DualInfo(DualInfoArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// JSON run config; only its `synthetic` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub n_s: Option<usize>,
    #[arg(long)]
    pub n_t: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub modules: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run config; its `training` section and `jobs` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// stp_gsr, direct_sr or autoencoder.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threads used for metric evaluation.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct DualInfoArgs {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Also check the three full models end to end.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Config file layout. Every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synthetic: SyntheticConfig,
    pub training: TrainConfig,
    pub jobs: Option<usize>,
}

/// Written to every output directory.
#[derive(Debug, Serialize)]
struct RunRecord<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    /// SHA-256 over the resolved config and every input file.
    input_hash: String,
    inputs: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Json { .. } => EXIT_IO,
            Error::Divergence { .. } => EXIT_DIVERGENCE,
            _ => EXIT_CONFIG,
        };
        CliError { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_CONFIG, message: message.into() }
}

fn out_error(e: std::io::Error) -> CliError {
    CliError { code: EXIT_IO, message: format!("writing output: {e}") }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::from(Error::io(p, e)))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))
        }
    }
}

fn input_hash<C: Serialize>(config: &C, files: &[PathBuf]) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serialises"));
    for f in files {
        let bytes = fs::read(f).map_err(|e| CliError::from(Error::io(f, e)))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn record_run<C: Serialize>(dir: &Path, command: &str, config: &C, inputs: Vec<PathBuf>) -> Result<(), CliError> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        input_hash: input_hash(config, &inputs)?,
        inputs,
    };
    write_json(&record, &dir.join("run.json"))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::from(Error::io(dir, e)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "null".into())
}

fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?.synthetic;
    cfg.samples = a.samples.unwrap_or(cfg.samples);
    cfg.n_s = a.n_s.unwrap_or(cfg.n_s);
    cfg.n_t = a.n_t.unwrap_or(cfg.n_t);
    cfg.noise = a.noise.unwrap_or(cfg.noise);
    cfg.modules = a.modules.unwrap_or(cfg.modules);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let samples = generate_synthetic(&cfg)?;
    write_dataset(&samples, cfg.seed, "synthetic", Some(cfg.clone()), &a.out)?;
    record_run(&a.out, "gen-data", &cfg, a.config.iter().cloned().collect())?;
    writeln!(
        out,
        "generated {} samples ({} -> {} nodes, seed {}) in {}",
        cfg.samples,
        cfg.n_s,
        cfg.n_t,
        cfg.seed,
        a.out.display()
    )
    .map_err(out_error)
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = load_config(a.config.as_deref())?;
    let mut cfg = run.training;
    if let Some(m) = &a.model {
        cfg.model_kind = m.parse::<ModelKind>()?;
    }
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
    cfg.accumulation_batch = a.batch.unwrap_or(cfg.accumulation_batch);
    cfg.fold_count = a.folds.unwrap_or(cfg.fold_count);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let jobs = a.jobs.or(run.jobs).unwrap_or(1).max(1);
    cfg.validate()?;

    let (manifest, samples) = load_dataset(&a.data)?;
    create_dir(&a.out)?;
    let mut inputs: Vec<PathBuf> = a.config.iter().cloned().collect();
    inputs.extend(dataset_files(&a.data, &manifest));
    record_run(&a.out, "train", &RunConfig { synthetic: manifest.generator.clone().unwrap_or_default(), training: cfg.clone(), jobs: Some(jobs) }, inputs)?;

    let start = Instant::now();
    let (report, folds) = cross_validate(&samples, &cfg, jobs)?;
    let mut csv = String::new();
    for f in &folds {
        let dir = a.out.join(format!("fold_{}", f.fold));
        create_dir(&dir)?;
        write_checkpoint(&f.model, Some(&cfg), &dir.join("checkpoint.json"))?;
        write_atomic(&dir.join("history.csv"), f.history.to_csv().as_bytes())?;
        write_report(&f.report, &dir.join("report.json"))?;
        write_json(&serde_json::json!({"train": f.train_ids, "test": f.test_ids}), &dir.join("split.json"))?;
        let fold_csv = f.report.to_csv();
        csv.push_str(if csv.is_empty() { &fold_csv } else { fold_csv.split_once('\n').map_or("", |x| x.1) });
        writeln!(
            out,
            "fold {}: {} train / {} test, final loss {:.6}, edge_mae {}",
            f.fold,
            f.train_ids.len(),
            f.test_ids.len(),
            f.history.epoch_loss.last().copied().unwrap_or(f64::NAN),
            fmt_opt(f.report.aggregate.get("edge_mae").copied().flatten())
        )
        .map_err(out_error)?;
    }
    write_json(&report, &a.out.join("report.json"))?;
    write_atomic(&a.out.join("report.csv"), csv.as_bytes())?;
    for (name, v) in &report.aggregate {
        writeln!(out, "  {name:<16} {}", fmt_opt(*v)).map_err(out_error)?;
    }
    let full_scale = param_count(cfg.model_kind, 160, 268);
    writeln!(
        out,
        "{}: {} parameters at {} -> {}; {:.3}M at 160 -> 268 (reference {:.3}M); {:.1}s",
        cfg.model_kind,
        report.param_count,
        report.n_s,
        report.n_t,
        full_scale as f64 / 1e6,
        cfg.model_kind.reference_params_millions(),
        start.elapsed().as_secs_f64()
    )
    .map_err(out_error)
}

fn eval_cmd(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, cp) = read_checkpoint(&a.checkpoint)?;
    let (manifest, samples) = load_dataset(&a.data)?;
    if (manifest.n_s, manifest.n_t) != (model.n_s, model.n_t) {
        return Err(config_error(format!(
            "checkpoint is {} -> {} but the dataset is {} -> {}",
            model.n_s, model.n_t, manifest.n_s, manifest.n_t
        )));
    }
    let seed = cp.config.as_ref().map_or(cp.seed, |c| c.seed);
    let (report, preds) = evaluate_model(&model, &samples, seed, None, a.jobs.max(1))?;
    let pred_dir = a.out.join("predictions");
    create_dir(&pred_dir)?;
    for (s, p) in samples.iter().zip(&preds) {
        write_matrix(p, &pred_dir.join(format!("{}_pred.csv", s.id)))?;
    }
    write_report(&report, &a.out.join("report.json"))?;
    let mut inputs = vec![a.checkpoint.clone()];
    inputs.extend(dataset_files(&a.data, &manifest));
    record_run(&a.out, "eval", &serde_json::json!({"checkpoint": cp.config, "jobs": a.jobs, "seed": seed}), inputs)?;
    writeln!(out, "evaluated {} samples with {}", samples.len(), model.kind).map_err(out_error)?;
    for (name, v) in &report.aggregate {
        writeln!(out, "  {name:<16} {}", fmt_opt(*v)).map_err(out_error)?;
    }
    Ok(())
}

fn dual_info(a: &DualInfoArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.n < 2 {
        return Err(config_error(format!("--n must be at least 2, got {}", a.n)));
    }
    let start = Instant::now();
    let dual = build_dual_complete(a.n)?;
    let m = dual.m();
    let edges = dual.dual_edges().len();
    let degree = if m > 0 { 2 * edges / m } else { 0 };
    let density = dual.density();
    let dense_bytes = (m as f64).powi(2) * 8.0;
    let lines = [
        format!("primal nodes      {}", a.n),
        format!("dual nodes (m)    {m}"),
        format!("regular degree    {degree}"),
        format!("dual edges        {edges}"),
        format!("density           {:.3}%", density * 100.0),
        format!("sparsity          {:.3}%", (1.0 - density) * 100.0),
        format!("edge list memory  {:.1} MB", dual.edge_bytes() as f64 / 1e6),
        format!("dense f64 matrix  {:.1} MB", dense_bytes / 1e6),
        format!("built in          {:.3}s", start.elapsed().as_secs_f64()),
    ];
    debug_assert_eq!(m, pair_count(a.n));
    for l in lines {
        writeln!(out, "{l}").map_err(out_error)?;
    }
    Ok(())
}

fn gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut results: Vec<GradCheckResult> = op_suite(a.seed)?;
    if a.full {
        results.extend(model_suite(a.seed)?);
    }
    writeln!(out, "{:<42} {:>12} {:>10}  status", "check", "max rel err", "threshold").map_err(out_error)?;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        writeln!(out, "{:<42} {:>12.3e} {:>10.0e}  {status}", r.name, r.max_rel_error, r.threshold).map_err(out_error)?;
    }
    let worst = results
        .iter()
        .max_by(|x, y| (x.max_rel_error / x.threshold).total_cmp(&(y.max_rel_error / y.threshold)))
        .expect("suite is nonempty");
    if results.iter().all(GradCheckResult::passed) {
        writeln!(out, "all {} checks passed (worst: {} at {:.3e})", results.len(), worst.name, worst.max_rel_error).map_err(out_error)
    } else {
        Err(CliError {
            code: EXIT_GRADCHECK,
            message: format!(
                "gradient check failed; worst op {} with relative error {:.3e} (threshold {:.0e})",
                worst.name, worst.max_rel_error, worst.threshold
            ),
        })
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::DualInfo(a) => dual_info(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
