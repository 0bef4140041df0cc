//! The `imle` command line: `train`, `compare` and `analyze`.
//!
//! Usage and configuration errors exit with status 2, numeric and I/O
//! failures with status 1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::probe::{read_probe, PROBE_FILE};
use crate::analysis::{mult_count, run_ig_inequality, run_kl_invariance, summarize_probe, MultCountMode, UpdateKind};
use crate::config::{Method, RunConfig};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::metrics::{read_metrics, write_csv};
use crate::pipeline::run_training;

pub const OUT_DIR_ENV: &str = "IMLE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "imle", version, about = "PPO with latent information-gain exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write its metrics, config and parameter snapshots.
    Train(TrainArgs),
    /// Train every method for every seed and aggregate the learning curves.
    Compare(CompareArgs),
    /// Run a standalone analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

/// Overrides shared by `train` and `compare`; unset flags keep the config value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat JSON config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<EnvKind>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Record the value-update probe (`bnn_probe.csv`).
    #[arg(long)]
    pub probe: bool,
    /// Write measured wall-clock time instead of zeros.
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; falls back to the config, then to `IMLE_OUT_DIR`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Ppo, Method::Vime, Method::Imle])]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// KL divergence before and after random invertible affine maps.
    KlInvariance {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Fixed dimension; cycles through 1 to 5 when omitted.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model-KL versus output-KL experiment on scalar linear models.
    IgInequality {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value = "gradient")]
        update: UpdateKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiplications per scored transition.
    MultCount {
        #[arg(long)]
        state: usize,
        #[arg(long)]
        action: usize,
        #[arg(long, num_args = 1.., default_values_t = [32usize, 32])]
        hidden: Vec<usize>,
        #[arg(long)]
        latent: Option<usize>,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long)]
        mode: MultCountMode,
    },
    /// Summarise `bnn_probe.csv` of a run, or train a probed run first.
    BnnProbe {
        /// Existing run directory containing `bnn_probe.csv`.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value = "sparse-mountaincar")]
        env: EnvKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl clap::ValueEnum for Method {
    fn value_variants<'a>() -> &'a [Self] {
        &[Method::Ppo, Method::Vime, Method::Imle]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

impl clap::ValueEnum for EnvKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[EnvKind::SparseMountainCar, EnvKind::SparseAcrobot]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

impl clap::ValueEnum for MultCountMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[MultCountMode::Vime, MultCountMode::Imle]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            MultCountMode::Vime => "vime",
            MultCountMode::Imle => "imle",
        }))
    }
}

impl clap::ValueEnum for UpdateKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[UpdateKind::Gradient, UpdateKind::Conjugate]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            UpdateKind::Gradient => "gradient",
            UpdateKind::Conjugate => "conjugate",
        }))
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Usage(_) | Error::Json(_) => 2,
        Error::Numeric(_) | Error::Domain(_) | Error::Io(_) => 1,
    }
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

impl Overrides {
    /// Loads the config file, if any, and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => {
                if self.env.is_none() {
                    return Err(Error::Usage("--env is required without --config".into()));
                }
                RunConfig::default()
            }
        };
        if let Some(env) = self.env {
            cfg.env = env;
        }
        if let Some(steps) = self.steps {
            cfg.total_steps = steps;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        cfg.probe |= self.probe;
        cfg.record_wall_time |= self.wall_clock;
        Ok(cfg)
    }
}

pub fn train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = args.common.resolve()?;
    if args.common.config.is_none() && args.method.is_none() {
        return Err(Error::Usage("--method is required without --config".into()));
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = match (&args.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => env_out_dir().ok_or_else(|| Error::Usage(format!("no output directory: pass --out or set {OUT_DIR_ENV}")))?,
    };
    cfg.out_dir = Some(out.to_string_lossy().into_owned());
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let cfg = train_config(args)?;
    let summary = run_training(&cfg)?;
    let last = summary.metrics.last().copied().unwrap_or_default();
    println!(
        "{} {} seed {}: {} epochs, {} steps, final mean return {}",
        cfg.env,
        cfg.method,
        cfg.seed,
        summary.metrics.len(),
        last.env_steps,
        last.mean_return
    );
    println!("wrote {}", cfg.out_dir.as_deref().unwrap_or_default());
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    method: Method,
    seed: u64,
    failed: u8,
    message: String,
}

#[derive(Debug, Clone, Serialize)]
struct AggregateRow {
    method: Method,
    epoch: usize,
    env_steps: usize,
    mean_return: f64,
    n_seeds: usize,
    failed_seeds: usize,
}

fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let base = args.common.resolve()?;
    if args.methods.is_empty() || args.seeds.is_empty() {
        return Err(Error::Usage("compare needs at least one method and one seed".into()));
    }
    let root = args
        .out
        .clone()
        .or_else(|| base.out_dir.as_ref().map(PathBuf::from))
        .or_else(env_out_dir)
        .ok_or_else(|| Error::Usage(format!("no output directory: pass --out or set {OUT_DIR_ENV}")))?;
    std::fs::create_dir_all(&root)?;

    let mut records = Vec::new();
    let mut curves: BTreeMap<(usize, usize), (f64, usize, usize)> = BTreeMap::new();
    let mut failures_by_method = vec![0usize; args.methods.len()];
    for (mi, &method) in args.methods.iter().enumerate() {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            cfg.method = method;
            cfg.seed = seed;
            cfg.out_dir = Some(run_dir(&root, method, seed).to_string_lossy().into_owned());
            let outcome = cfg.validate().and_then(|_| run_training(&cfg));
            match outcome {
                Ok(summary) => {
                    for m in &summary.metrics {
                        let e = curves.entry((mi, m.epoch)).or_insert((0.0, 0, m.env_steps));
                        e.0 += m.mean_return;
                        e.1 += 1;
                    }
                    records.push(RunRecord { method, seed, failed: 0, message: String::new() });
                    println!("{method} seed {seed}: ok");
                }
                Err(err) => {
                    failures_by_method[mi] += 1;
                    records.push(RunRecord { method, seed, failed: 1, message: err.to_string() });
                    eprintln!("{method} seed {seed}: failed: {err}");
                }
            }
        }
    }
    let rows: Vec<AggregateRow> = curves
        .into_iter()
        .map(|((mi, epoch), (sum, n, env_steps))| AggregateRow {
            method: args.methods[mi],
            epoch,
            env_steps,
            mean_return: sum / n as f64,
            n_seeds: n,
            failed_seeds: failures_by_method[mi],
        })
        .collect();
    write_csv(&root.join("aggregate.csv"), &rows)?;
    write_csv(&root.join("runs.csv"), &records)?;
    println!("wrote {}", root.join("aggregate.csv").display());
    Ok(if records.iter().any(|r| r.failed == 1) { 1 } else { 0 })
}

/// Directory of one run inside a `compare` output tree.
pub fn run_dir(root: &Path, method: Method, seed: u64) -> PathBuf {
    root.join(format!("{method}-seed{seed}"))
}

fn analysis_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().or_else(env_out_dir).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_analyze(cmd: &AnalyzeCommand) -> Result<i32> {
    match cmd {
        AnalyzeCommand::KlInvariance { trials, dim, seed, out } => {
            let dims: Vec<usize> = match dim {
                Some(d) => vec![*d],
                None => (1..=5).collect(),
            };
            let report = run_kl_invariance(*trials, &dims, *seed)?;
            let path = analysis_dir(out)?.join("kl_invariance.json");
            write_json(&path, &report)?;
            println!(
                "kl-invariance: {} trials, max |difference| {:e}, failures {} -> {}",
                report.trials,
                report.max_abs_diff,
                report.failures,
                if report.passed() { "pass" } else { "FAIL" }
            );
            Ok(if report.passed() { 0 } else { 1 })
        }
        AnalyzeCommand::IgInequality { trials, update, seed, out } => {
            let (report, _) = run_ig_inequality(*trials, *update, *seed)?;
            let path = analysis_dir(out)?.join("ig_report.json");
            write_json(&path, &report)?;
            println!(
                "ig-inequality: {} trials, violations {} ({:.4}%), min margin {:e}, mean margin {:e}, head-equality failures {} (max error {:e})",
                report.n_trials,
                report.violations,
                100.0 * report.violation_rate,
                report.min_margin,
                report.mean_margin,
                report.head_equality_failures,
                report.max_head_error
            );
            println!("wrote {}", path.display());
            Ok(if report.passed() { 0 } else { 1 })
        }
        AnalyzeCommand::MultCount { state, action, hidden, latent, samples, mode } => {
            println!("{}", mult_count(*state, *action, hidden, *latent, *samples, *mode)?);
            Ok(0)
        }
        AnalyzeCommand::BnnProbe { run, env, seed, steps, out } => {
            let dir = match run {
                Some(dir) => dir.clone(),
                None => {
                    let dir = analysis_dir(out)?;
                    let mut cfg = RunConfig::new(*env, Method::Imle, *seed);
                    cfg.total_steps = *steps;
                    cfg.probe = true;
                    cfg.out_dir = Some(dir.to_string_lossy().into_owned());
                    run_training(&cfg)?;
                    dir
                }
            };
            let rows = read_probe(&dir.join(PROBE_FILE))?;
            let epochs = read_metrics(&dir.join("metrics.csv"))?.len();
            let summary = summarize_probe(&rows, epochs);
            write_json(&dir.join("probe_report.json"), &summary)?;
            match summary.early_fraction {
                Some(f) => println!(
                    "bnn-probe: {} rows; {}/{} improving in the first {} epochs ({:.1}%)",
                    summary.rows,
                    summary.early_improving,
                    summary.early_rows,
                    summary.early_epochs,
                    100.0 * f
                ),
                None => println!("bnn-probe: {} rows; none in the first {} epochs", summary.rows, summary.early_epochs),
            }
            Ok(0)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Analyze(c) => cmd_analyze(c),
    }
}
