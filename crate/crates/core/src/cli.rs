//! The `mer` command-line interface.
//!
//! Exit codes: 0 on success, 2 for usage and input errors, 3 when training
//! diverges (a partial report is still written), 1 for I/O failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::classifier::{Checkpoint, LambdaSchedule, LossKind, SgdConfig, TrainConfig};
use crate::convergence::{curve, log_spaced};
use crate::data::{CsvSchema, LabelColumn};
use crate::error::{Error, Result};
use crate::harness::{
    compare_ls, corrupt_sweep, execute, gen_data, verify_cpp, write_curve, DatasetSource, RunSpec,
    RunStatus,
};

#[derive(Debug, Parser)]
#[command(
    name = "mer",
    version,
    about = "Maximum entropy regularization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write a JSON report.
    Train(TrainCmd),
    /// Write the λ → converged true-class probability curve as CSV.
    Curve(CurveCmd),
    /// Compare converged e^{-CE} with the closed form at fixed λs.
    VerifyCpp(VerifyCmd),
    /// Paired MER and label-smoothing runs at matched target probabilities.
    CompareLs(CompareCmd),
    /// Held-out accuracy over corruption rates × λs.
    CorruptSweep(SweepCmd),
    /// Generate a synthetic dataset as CSV.
    GenData(GenDataCmd),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV path or `synthetic[:classes=20,per_class=100,dim=32,spacing=2.4,...]`.
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    /// Number of classes (overrides the synthetic spec; bounds CSV labels).
    #[arg(long)]
    classes: Option<usize>,
    /// CSV label column: first, last or a zero-based index.
    #[arg(long, default_value = "last")]
    label_column: String,
    /// The CSV file starts with a header row.
    #[arg(long)]
    csv_header: bool,
    /// Hold out this fraction of the data for evaluation.
    #[arg(long)]
    eval_fraction: Option<f64>,
}

impl DataArgs {
    fn source(&self) -> Result<DatasetSource> {
        let mut source: DatasetSource = self.dataset.parse()?;
        if let DatasetSource::Csv { schema, .. } = &mut source {
            *schema = CsvSchema {
                label_column: parse_label_column(&self.label_column)?,
                has_header: self.csv_header,
                ..CsvSchema::default()
            };
        }
        Ok(match self.classes {
            Some(c) => source.with_class_count(c),
            None => source,
        })
    }
}

fn parse_label_column(s: &str) -> Result<LabelColumn> {
    match s {
        "first" => Ok(LabelColumn::First),
        "last" => Ok(LabelColumn::Last),
        other => other
            .parse()
            .map(LabelColumn::Index)
            .map_err(|_| Error::Usage(format!("bad label column {other:?}"))),
    }
}

#[derive(Debug, Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    /// Hidden width, or `none` for a linear model.
    #[arg(long, default_value = "80")]
    hidden: String,
    /// Epochs without improvement before the learning rate is cut tenfold.
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Stop once the learning rate floor is reached and progress stalls.
    #[arg(long)]
    stop_at_floor: bool,
}

impl OptimArgs {
    fn config(&self, loss: LossKind, schedule: LambdaSchedule) -> Result<TrainConfig> {
        let hidden_dim = match self.hidden.as_str() {
            "none" | "0" => None,
            h => Some(
                h.parse()
                    .map_err(|_| Error::Usage(format!("bad hidden width {h:?}")))?,
            ),
        };
        let config = TrainConfig {
            loss,
            lambda_schedule: schedule,
            hidden_dim,
            batch_size: self.batch_size,
            epochs: self.epochs,
            sgd: SgdConfig {
                learning_rate: self.lr,
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            plateau_patience: self.patience,
            stop_at_floor: self.stop_at_floor,
            seed: self.seed,
            ..TrainConfig::default()
        };
        config.validate().map_err(usage)?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value = "ce")]
    loss: String,
    #[arg(long, conflicts_with = "lambda_schedule")]
    lambda: Option<f64>,
    /// Piecewise-constant λ: `epoch:value,...`, e.g. `0:0.1,20:0.5`.
    #[arg(long)]
    lambda_schedule: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    corruption_rate: f64,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch CSV trace path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Save trained parameters here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveCmd {
    /// Class counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3665")]
    classes: Vec<usize>,
    /// Explicit λ values; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    lambda_min: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Number of seeds; run r offsets both training and synthetic data seeds by r.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyCmd {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Fixed λ values, comma separated.
    #[arg(
        long,
        alias = "lambdas",
        value_delimiter = ',',
        default_value = "0.1,0.3,0.7"
    )]
    lambda: Vec<f64>,
    /// Only `mer` is meaningful here.
    #[arg(long, default_value = "mer")]
    loss: String,
}

#[derive(Debug, Args)]
struct CompareCmd {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Target true-class probabilities, comma separated.
    #[arg(
        long,
        alias = "cpps",
        value_delimiter = ',',
        default_value = "0.41,0.77"
    )]
    cpp: Vec<f64>,
    /// Derive λ_LS from the exact inverse instead of `1 − cpp`.
    #[arg(long)]
    exact_ls: bool,
}

#[derive(Debug, Args)]
struct SweepCmd {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Corruption rates, comma separated.
    #[arg(long, alias = "rates", value_delimiter = ',', default_value = "0,0.2")]
    corruption_rate: Vec<f64>,
    /// MER λs besides the λ = 0 baseline, comma separated.
    #[arg(
        long,
        alias = "lambdas",
        value_delimiter = ',',
        default_value = "0.5,1,2"
    )]
    lambda: Vec<f64>,
}

#[derive(Debug, Args)]
struct GenDataCmd {
    /// Synthetic spec string.
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    #[arg(long)]
    classes: Option<usize>,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write a JSON summary here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn usage(e: Error) -> Error {
    match e {
        Error::Usage(_) => e,
        other => Error::Usage(other.to_string()),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    write_output(path, &serde_json::to_string_pretty(value)?)
}

fn suite_base(args: &SuiteArgs, eval_fraction: Option<f64>) -> Result<RunSpec> {
    let config = args
        .optim
        .config(LossKind::Mer, LambdaSchedule::constant(0.0)?)?;
    let mut spec = RunSpec::new(args.data.source()?, config);
    spec.eval_fraction = args.data.eval_fraction.or(eval_fraction);
    spec.validate().map_err(usage)?;
    Ok(spec)
}

/// Exit code 3 when any run in a suite diverged.
fn suite_code(failures: usize) -> i32 {
    if failures > 0 {
        3
    } else {
        0
    }
}

fn cmd_train(cmd: &TrainCmd) -> Result<i32> {
    let loss: LossKind = cmd.loss.parse().map_err(usage)?;
    let schedule = match (&cmd.lambda, &cmd.lambda_schedule) {
        (_, Some(s)) => s.parse::<LambdaSchedule>().map_err(usage)?,
        (Some(l), None) => LambdaSchedule::constant(*l).map_err(usage)?,
        (None, None) => LambdaSchedule::constant(0.0)?,
    };
    if loss == LossKind::Ce && schedule.max_lambda() != 0.0 {
        return Err(Error::Usage("--loss ce takes no λ".into()));
    }
    let mut spec = RunSpec::new(cmd.data.source()?, cmd.optim.config(loss, schedule)?);
    spec.eval_fraction = cmd.data.eval_fraction;
    spec.corruption_rate = cmd.corruption_rate;
    spec.validate().map_err(usage)?;

    let run = execute(&spec)?;
    write_output(cmd.out.as_deref(), &run.report.to_json()?)?;
    if let Some(path) = &cmd.trace {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        run.report.write_trace(file)?;
    }
    if let (Some(path), Some(params)) = (&cmd.checkpoint, run.params) {
        Checkpoint {
            params,
            seed: spec.train.seed,
            epoch: run.report.summary.epochs_run,
        }
        .save(path)?;
    }
    Ok(match run.report.status {
        RunStatus::Completed => 0,
        RunStatus::Diverged => {
            eprintln!(
                "mer: {}",
                run.report.error.as_deref().unwrap_or("training diverged")
            );
            3
        }
    })
}

fn cmd_curve(cmd: &CurveCmd) -> Result<i32> {
    let lambdas = if cmd.lambda.is_empty() {
        log_spaced(cmd.lambda_min, cmd.lambda_max, cmd.points).map_err(usage)?
    } else {
        cmd.lambda.clone()
    };
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Usage(format!("λ must be > 0, got {bad}")));
    }
    if cmd.classes.iter().any(|&c| c < 2) {
        return Err(Error::Usage("class counts must be >= 2".into()));
    }
    let points = curve(&lambdas, &cmd.classes)?;
    let mut buf = Vec::new();
    write_curve(&points, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    write_output(cmd.out.as_deref(), text.trim_end())?;
    Ok(0)
}

fn cmd_verify(cmd: &VerifyCmd) -> Result<i32> {
    if cmd.loss.parse::<LossKind>().map_err(usage)? != LossKind::Mer {
        return Err(Error::Usage("verify-cpp only applies to --loss mer".into()));
    }
    let base = suite_base(&cmd.suite, None)?;
    let report = verify_cpp(&base, &cmd.lambda, cmd.suite.runs)?;
    write_json(cmd.suite.out.as_deref(), &report)?;
    Ok(suite_code(report.failures))
}

fn cmd_compare(cmd: &CompareCmd) -> Result<i32> {
    let base = suite_base(&cmd.suite, None)?;
    let report = compare_ls(&base, &cmd.cpp, cmd.exact_ls, cmd.suite.runs)?;
    write_json(cmd.suite.out.as_deref(), &report)?;
    Ok(suite_code(report.failures))
}

fn cmd_sweep(cmd: &SweepCmd) -> Result<i32> {
    let base = suite_base(&cmd.suite, Some(0.2))?;
    let report = corrupt_sweep(&base, &cmd.corruption_rate, &cmd.lambda, cmd.suite.runs)?;
    write_json(cmd.suite.out.as_deref(), &report)?;
    Ok(suite_code(report.failures))
}

fn cmd_gen_data(cmd: &GenDataCmd) -> Result<i32> {
    let DatasetSource::Synthetic(mut spec) = cmd.dataset.parse()? else {
        return Err(Error::Usage("gen-data needs a synthetic spec".into()));
    };
    if let Some(c) = cmd.classes {
        spec.class_count = c;
    }
    if let Some(s) = cmd.seed {
        spec.seed = s;
    }
    spec.validate().map_err(usage)?;
    let report = gen_data(&spec, &cmd.out)?;
    if let Some(path) = &cmd.report {
        write_json(Some(path), &report)?;
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Curve(c) => cmd_curve(c),
        Command::VerifyCpp(c) => cmd_verify(c),
        Command::CompareLs(c) => cmd_compare(c),
        Command::CorruptSweep(c) => cmd_sweep(c),
        Command::GenData(c) => cmd_gen_data(c),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mer: {e}");
            e.exit_code()
        }
    }
}
