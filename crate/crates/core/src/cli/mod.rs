//! The `halfspace` command-line tool.
//!
//! Subcommands: `gen`, `train`, `eval`, `sweep`, `approx`, `bounds`. Every
//! subcommand also reads flags from a `key=value` file given with `--config`;
//! flags on the command line win. `--save-config` writes the effective flags
//! back out in the same format. Exit codes: 0 success, 1 runtime or data
//! error, 2 usage error.

mod commands;
pub mod io;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::LabelNoise;
use crate::solver::{Batch, SolverOptions, StepSchedule};
use crate::transfer::{TransferKind, TransferVariant};

#[derive(Debug, Parser)]
#[command(name = "halfspace", version, about = "Kernel-based agnostic learning of halfspaces")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat key=value file; its entries act as flags placed before the command line ones.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write the effective flags of this run as a key=value file.
    #[arg(long, global = true, value_name = "PATH")]
    pub save_config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Solve the norm-constrained ERM and write a model file.
    Train(TrainArgs),
    /// Score a model on a dataset.
    Eval(EvalArgs),
    /// Cross-validate B over a grid for several seeds.
    Sweep(SweepArgs),
    /// Polynomial approximations of the sigmoid and erf transfers.
    Approx(ApproxArgs),
    /// Sample sizes and budgets from the closed-form bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferArg {
    Sig,
    Erf,
    Pw,
    ZeroOne,
}

impl TransferArg {
    fn kind(self, lipschitz: f64) -> Result<TransferKind> {
        let variant = match self {
            TransferArg::Sig => TransferVariant::Sigmoid,
            TransferArg::Erf => TransferVariant::Erf,
            TransferArg::Pw => TransferVariant::PiecewiseLinear,
            TransferArg::ZeroOne => TransferVariant::ZeroOne,
        };
        TransferKind::new(variant, lipschitz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    /// y ~ Bernoulli(phi(<w*, x>))
    Prob,
    /// y = 1[phi(<w*, x>) >= 1/2]
    Det,
}

impl From<NoiseArg> for LabelNoise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Prob => LabelNoise::Probabilistic,
            NoiseArg::Det => LabelNoise::DeterministicThreshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchArg {
    Full,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepArg {
    InverseSqrt,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxTarget {
    Sig,
    Erf,
    Both,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn unit_open_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Lipschitz constant of the transfer (ignored for zero-one).
    #[arg(long = "L", default_value_t = 3.0, value_parser = positive_f64)]
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[arg(long, value_enum, default_value_t = TransferArg::Sig)]
    pub transfer: TransferArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Prob)]
    pub noise: NoiseArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long)]
    pub seed: u64,
    /// Seed of the direction w*.
    #[arg(long, default_value_t = 0)]
    pub w_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = BatchArg::Full)]
    pub batch: BatchArg,
    #[arg(long, value_enum, requires = "step_c")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<StepArg>,
    /// Step constant c for --step.
    #[arg(long, value_parser = positive_f64, requires = "step")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_c: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters.map(|n| n as usize),
            step_schedule: match (self.step, self.step_c) {
                (Some(StepArg::Constant), Some(c)) => Some(StepSchedule::Constant(c)),
                (Some(StepArg::InverseSqrt), Some(c)) => Some(StepSchedule::InverseSqrt(c)),
                _ => None,
            },
            seed: self.seed,
            tolerance: self.tolerance,
            batch: match self.batch {
                BatchArg::Full => Batch::Full,
                BatchArg::Single => Batch::SingleSample,
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Norm budget B.
    #[arg(long = "B", value_parser = positive_f64, required_unless_present = "log_b", conflicts_with = "log_b")]
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Norm budget given as ln B.
    #[arg(long = "log-B", allow_hyphen_values = true)]
    #[serde(rename = "log-B", skip_serializing_if = "Option::is_none")]
    pub log_b: Option<f64>,
    #[arg(long, default_value_t = 0.5, value_parser = unit_open_f64)]
    pub nu: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Margins at which to report the margin error of the model's score.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64)]
    #[serde(serialize_with = "join_list", skip_serializing_if = "Vec::is_empty")]
    pub mu: Vec<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', value_parser = positive_f64, default_value = "1,10,100,1000,10000")]
    #[serde(serialize_with = "join_list")]
    pub grid: Vec<f64>,
    /// Number of seeds; seed i uses data seed `seed-base + i`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long = "L", default_value_t = 3.0, value_parser = positive_f64)]
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[arg(long, value_enum, default_value_t = TransferArg::Sig)]
    pub transfer: TransferArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Prob)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    pub w_seed: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
    pub m: u64,
    #[arg(long, default_value_t = 0.2, value_parser = unit_open_f64)]
    pub holdout: f64,
    /// Offset added to the data seed to obtain the holdout split seed.
    #[arg(long, default_value_t = 1_000_003)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_open_f64)]
    pub nu: f64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ApproxArgs {
    #[arg(long = "L", value_parser = positive_f64)]
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[arg(long, value_parser = unit_open_f64)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = ApproxTarget::Sig)]
    pub target: ApproxTarget,
    /// Odd Taylor degree for erf; by default the lowest one reaching --eps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[arg(long, default_value_t = crate::polyspace::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value_t = crate::polyspace::DEFAULT_MAX_DEGREE)]
    pub max_degree: usize,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundsArgs {
    #[arg(long = "L", value_parser = positive_f64)]
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[arg(long, value_parser = unit_open_f64)]
    pub eps: f64,
    #[arg(long, value_parser = unit_open_f64)]
    pub delta: f64,
    /// Explicit budget for the ERM sample size (defaults to the sigmoid budget).
    #[arg(long = "B", value_parser = positive_f64)]
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Margin for the Lipschitz conversions.
    #[arg(long, value_parser = positive_f64)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

fn join_list<S: serde::Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    s.serialize_str(&joined.join(","))
}

/// Parses a `key=value` config file into `--key value` arguments.
/// Blank lines and lines starting with `#` are ignored.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse { line: i as u64 + 1, message: format!("expected key=value, got {line:?}") });
        };
        out.push(format!("--{}", key.trim()).into());
        out.push(value.trim().into());
    }
    Ok(out)
}

/// Renders the flags of `args` as `key=value` lines.
pub fn render_config<T: Serialize>(args: &T) -> Result<String> {
    let value = serde_json::to_value(args)?;
    let mut out = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let rendered = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => continue,
                other => other.to_string(),
            };
            out.push_str(&format!("{k}={rendered}\n"));
        }
    }
    Ok(out)
}

/// Splices the entries of `--config` in right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = iter.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let extra = config_args(&path)?;
    // program name and subcommand come first
    let split = rest.len().min(2);
    let tail = rest.split_off(split);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}

/// Runs the tool, printing to stdout/stderr, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &cli.save_config {
        let rendered = match &cli.command {
            Command::Gen(a) => render_config(a)?,
            Command::Train(a) => render_config(a)?,
            Command::Eval(a) => render_config(a)?,
            Command::Sweep(a) => render_config(a)?,
            Command::Approx(a) => render_config(a)?,
            Command::Bounds(a) => render_config(a)?,
        };
        std::fs::write(path, rendered)?;
    }
    match &cli.command {
        Command::Gen(a) => commands::gen(a, out),
        Command::Train(a) => commands::train(a, out),
        Command::Eval(a) => commands::eval(a, out),
        Command::Sweep(a) => commands::sweep(a, out),
        Command::Approx(a) => commands::approx(a, out),
        Command::Bounds(a) => commands::bounds(a, out),
    }
}
