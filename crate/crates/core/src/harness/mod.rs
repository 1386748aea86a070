//! Reproducible experiment runs and the reports they produce.
//!
//! A [`RunSpec`] names a dataset, an optional held-out fraction, a label
//! corruption rate and a [`TrainConfig`]. [`execute`] turns it into a
//! [`RunReport`] whose `config` field is the spec itself, so feeding that
//! echo back into [`execute`] reproduces the metrics bit for bit.

mod suites;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{train, LossKind, ModelParams, TrainConfig, TrainMetrics};
use crate::convergence::{cpp_for_lambda, cpp_from_ce, ls_cpp, CurvePoint};
use crate::data::{
    corrupt_labels, generate_synthetic, load_csv, split, CsvSchema, LabeledDataset, SyntheticSpec,
};
use crate::error::{Error, Result};

pub use suites::{
    compare_ls, corrupt_sweep, gen_data, verify_cpp, CompareLsReport, CompareRow, CompareSide,
    CompareSummary, GenDataReport, SweepCell, SweepReport, SweepTableRow, SweepWins, VerifyReport,
    VerifyRow,
};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a run's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, schema: CsvSchema },
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
            DatasetSource::Csv { path, schema } => load_csv(path, schema),
        }
    }

    /// Overrides the number of classes.
    pub fn with_class_count(mut self, classes: usize) -> Self {
        match &mut self {
            DatasetSource::Synthetic(spec) => spec.class_count = classes,
            DatasetSource::Csv { schema, .. } => schema.class_count = Some(classes),
        }
        self
    }

    /// The source used by the `run`-th repetition of a multi-seed suite:
    /// synthetic data is regenerated with its seed offset by `run`, files
    /// are reused as they are.
    pub fn for_run(&self, run: usize) -> Self {
        let mut out = self.clone();
        if let DatasetSource::Synthetic(spec) = &mut out {
            spec.seed = spec.seed.wrapping_add(run as u64);
        }
        out
    }
}

/// Parses either `synthetic[:key=value,...]` or a CSV path.
///
/// Synthetic keys: `classes`, `per_class`, `imbalance`, `dim`, `spacing`,
/// `noise`, `group`, `radius`, `seed`. Unlisted keys keep their defaults.
impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(rest) = s.strip_prefix("synthetic") else {
            if s.is_empty() {
                return Err(Error::Usage("empty dataset argument".into()));
            }
            return Ok(DatasetSource::Csv {
                path: PathBuf::from(s),
                schema: CsvSchema::default(),
            });
        };
        let mut spec = SyntheticSpec::default();
        let body = match rest.strip_prefix(':') {
            Some(body) => body,
            None if rest.is_empty() => "",
            None => return Err(Error::Usage(format!("malformed synthetic spec {s:?}"))),
        };
        for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("expected key=value, got {pair:?}")))?;
            let bad = || Error::Usage(format!("cannot parse {key}={value:?}"));
            match key.trim() {
                "classes" => spec.class_count = value.parse().map_err(|_| bad())?,
                "per_class" => spec.samples_per_class = value.parse().map_err(|_| bad())?,
                "imbalance" => spec.imbalance_ratio = Some(value.parse().map_err(|_| bad())?),
                "dim" => spec.feature_dim = value.parse().map_err(|_| bad())?,
                "spacing" => spec.spacing = value.parse().map_err(|_| bad())?,
                "noise" => spec.noise = value.parse().map_err(|_| bad())?,
                "group" => spec.group_size = value.parse().map_err(|_| bad())?,
                "radius" => spec.anchor_radius = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                other => return Err(Error::Usage(format!("unknown synthetic key {other:?}"))),
            }
        }
        spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(DatasetSource::Synthetic(spec))
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Synthetic(s) => {
                write!(
                    f,
                    "synthetic:classes={},per_class={},dim={},spacing={},noise={},group={},radius={},seed={}",
                    s.class_count,
                    s.samples_per_class,
                    s.feature_dim,
                    s.spacing,
                    s.noise,
                    s.group_size,
                    s.anchor_radius,
                    s.seed
                )?;
                if let Some(r) = s.imbalance_ratio {
                    write!(f, ",imbalance={r}")?;
                }
                Ok(())
            }
            DatasetSource::Csv { path, .. } => write!(f, "{}", path.display()),
        }
    }
}

/// Everything a run depends on.
///
/// When `eval_fraction` is set the dataset is split (stratified, seeded by
/// `train.seed`) and the held-out part is evaluated every epoch. Corruption
/// touches training labels only, seeded by `train.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetSource,
    pub eval_fraction: Option<f64>,
    pub corruption_rate: f64,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn new(dataset: DatasetSource, train: TrainConfig) -> Self {
        RunSpec {
            dataset,
            eval_fraction: None,
            corruption_rate: 0.0,
            train,
        }
    }

    /// Reads the `config` echo out of a serialized [`RunReport`]. Works on
    /// partial reports from diverged runs too.
    pub fn from_report_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let config = value
            .get("config")
            .ok_or_else(|| Error::Validation("report has no config echo".into()))?;
        Ok(serde_json::from_value(config.clone())?)
    }

    /// The `run`-th repetition of this spec: training seed and synthetic
    /// data seed both offset by `run`.
    pub fn for_run(&self, run: usize) -> Self {
        let mut out = self.clone();
        out.dataset = self.dataset.for_run(run);
        out.train.seed = self.train.seed.wrapping_add(run as u64);
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return Err(Error::invalid(format!(
                "corruption rate must lie in [0, 1], got {}",
                self.corruption_rate
            )));
        }
        if let Some(f) = self.eval_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!(
                    "eval fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Loads, splits and corrupts the data.
    pub fn prepare(&self) -> Result<PreparedData> {
        self.validate()?;
        let full = self.dataset.load()?;
        let (train_set, eval_set) = match self.eval_fraction {
            Some(f) => {
                let parts = split(&full, 1.0 - f, self.train.seed)?;
                (parts.train, Some(parts.eval))
            }
            None => (full, None),
        };
        let train_set = corrupt_labels(&train_set, self.corruption_rate, self.train.seed)?;
        Ok(PreparedData {
            train: train_set,
            eval: eval_set,
        })
    }
}

/// Datasets ready for [`train`].
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub eval: Option<LabeledDataset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Training hit a non-finite value; metrics hold the epochs before it.
    Diverged,
}

/// Shape of the data a run saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub class_count: usize,
    pub feature_dim: usize,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub corrupted_labels: usize,
}

/// Final-epoch figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epochs_run: usize,
    pub final_lambda: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    /// Mean training cross-entropy, in nats.
    pub final_ce: f64,
    /// `e^{-final_ce}`.
    pub experimental_cpp: f64,
    /// Where the true-class probability settles if the loss is fully
    /// minimized; 1 for plain cross-entropy.
    pub theoretical_cpp: f64,
    pub training_entropy: f64,
}

/// The JSON report of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: RunSpec,
    pub data: DataSummary,
    pub summary: RunSummary,
    pub wall_clock_seconds: f64,
    pub metrics: TrainMetrics,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the per-epoch trace as CSV.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        write_trace(&self.metrics, out)
    }
}

/// A run's report plus the trained parameters when it completed.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: RunReport,
    pub params: Option<ModelParams>,
}

/// Converged true-class probability implied by a loss at a given λ.
pub fn theoretical_cpp(loss: LossKind, lambda: f64, class_count: usize) -> Result<f64> {
    match loss {
        LossKind::Ce => Ok(1.0),
        LossKind::Mer if lambda == 0.0 => Ok(1.0),
        LossKind::Mer => cpp_for_lambda(lambda, class_count),
        LossKind::Ls => ls_cpp(lambda, class_count),
    }
}

/// Prepares the data and trains. Numerical failures during training give
/// an `Ok` run with [`RunStatus::Diverged`] and the partial trace;
/// configuration and data problems are errors.
pub fn execute(spec: &RunSpec) -> Result<Run> {
    let started = Instant::now();
    let data = spec.prepare()?;
    let summary_data = DataSummary {
        class_count: data.train.class_count(),
        feature_dim: data.train.feature_dim(),
        train_samples: data.train.len(),
        eval_samples: data.eval.as_ref().map_or(0, LabeledDataset::len),
        corrupted_labels: data.train.corrupted_count(),
    };
    let (metrics, params, status, error) = match train(&spec.train, &data.train, data.eval.as_ref())
    {
        Ok(outcome) => (
            outcome.metrics,
            Some(outcome.params),
            RunStatus::Completed,
            None,
        ),
        Err(e) => match e.partial {
            Some(partial) if matches!(e.source, Error::Numerical(_)) => (
                partial,
                None,
                RunStatus::Diverged,
                Some(e.source.to_string()),
            ),
            _ => return Err(e.source),
        },
    };
    let last = metrics.last();
    let summary = RunSummary {
        epochs_run: last.epoch,
        final_lambda: last.lambda,
        train_accuracy: last.train_accuracy,
        eval_accuracy: last.eval_accuracy,
        final_ce: last.train_ce,
        experimental_cpp: cpp_from_ce(last.train_ce).unwrap_or(f64::NAN),
        theoretical_cpp: theoretical_cpp(spec.train.loss, last.lambda, summary_data.class_count)?,
        training_entropy: last.train_entropy,
    };
    let report = RunReport {
        version: VERSION.to_string(),
        seed: spec.train.seed,
        status,
        error,
        config: spec.clone(),
        data: summary_data,
        summary,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        metrics,
    };
    Ok(Run { report, params })
}

/// Column order of [`write_trace`].
pub const TRACE_HEADER: [&str; 9] = [
    "epoch",
    "lambda",
    "learning_rate",
    "train_ce",
    "train_entropy",
    "train_objective",
    "train_accuracy",
    "eval_accuracy",
    "eval_ce",
];

/// Per-epoch CSV trace; missing evaluation columns are left empty.
pub fn write_trace<W: Write>(metrics: &TrainMetrics, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &metrics.epochs {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))
}

/// Column order of [`write_curve`].
pub const CURVE_HEADER: [&str; 3] = ["lambda", "cpp", "class_count"];

pub fn write_curve<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(csv_err)?;
    }
    // An empty curve still gets its header.
    if points.is_empty() {
        w.write_record(CURVE_HEADER).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<curve>", e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv output: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LambdaSchedule;

    fn small_spec() -> RunSpec {
        let source: DatasetSource = "synthetic:classes=4,per_class=10,dim=3".parse().unwrap();
        RunSpec::new(
            source,
            TrainConfig {
                loss: LossKind::Mer,
                lambda_schedule: LambdaSchedule::constant(0.3).unwrap(),
                hidden_dim: Some(5),
                epochs: 3,
                ..TrainConfig::default()
            },
        )
    }

    #[test]
    fn synthetic_source_parsing() {
        let s: DatasetSource = "synthetic".parse().unwrap();
        assert_eq!(s, DatasetSource::Synthetic(SyntheticSpec::default()));
        let s: DatasetSource = "synthetic:classes=7, spacing=1.5,imbalance=0.9,seed=3"
            .parse()
            .unwrap();
        let DatasetSource::Synthetic(spec) = &s else {
            panic!()
        };
        assert_eq!(spec.class_count, 7);
        assert_eq!(spec.spacing, 1.5);
        assert_eq!(spec.imbalance_ratio, Some(0.9));
        assert_eq!(spec.seed, 3);
        assert_eq!(s.to_string().parse::<DatasetSource>().unwrap(), s);
        assert!(matches!(
            "data/train.csv".parse::<DatasetSource>().unwrap(),
            DatasetSource::Csv { .. }
        ));
        for bad in [
            "synthetic:classes",
            "synthetic:colour=3",
            "synthetic:classes=1",
            "syntheticx",
            "",
        ] {
            assert!(
                matches!(bad.parse::<DatasetSource>(), Err(Error::Usage(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn report_echo_round_trips() {
        let run = execute(&small_spec()).unwrap();
        let json = run.report.to_json().unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, run.report);
        assert_eq!(RunSpec::from_report_json(&json).unwrap(), small_spec());
    }

    #[test]
    fn summary_matches_last_epoch() {
        let run = execute(&small_spec()).unwrap();
        let r = &run.report;
        let last = r.metrics.last();
        assert_eq!(r.summary.epochs_run, 3);
        assert_eq!(r.summary.final_ce, last.train_ce);
        assert_eq!(r.summary.theoretical_cpp, cpp_for_lambda(0.3, 4).unwrap());
        assert_eq!(r.data.train_samples, 40);
        assert_eq!(r.status, RunStatus::Completed);
    }

    #[test]
    fn corruption_and_split_are_applied() {
        let mut spec = small_spec();
        spec.eval_fraction = Some(0.2);
        spec.corruption_rate = 0.1;
        let data = spec.prepare().unwrap();
        assert_eq!(data.train.len(), 32);
        assert_eq!(data.eval.as_ref().unwrap().len(), 8);
        assert_eq!(data.train.corrupted_count(), 3);
        assert_eq!(data.eval.unwrap().corrupted_count(), 0);
    }

    #[test]
    fn divergence_yields_partial_report() {
        let mut spec = small_spec();
        spec.train.sgd.learning_rate = 1e200;
        spec.train.epochs = 5;
        let run = execute(&spec).unwrap();
        assert_eq!(run.report.status, RunStatus::Diverged);
        assert!(run.params.is_none());
        assert!(run.report.error.as_deref().unwrap().contains("non-finite"));
        let json = run.report.to_json().unwrap();
        assert_eq!(RunSpec::from_report_json(&json).unwrap(), spec);
    }

    #[test]
    fn trace_header_is_stable() {
        let run = execute(&small_spec()).unwrap();
        let mut buf = Vec::new();
        run.report.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + 4);
    }
}
