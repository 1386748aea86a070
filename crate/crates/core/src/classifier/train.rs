use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, LossKind, LossSpec, ModelParams};
use super::optim::{sgd_step, OptimizerState, SgdConfig};
use crate::convergence::cpp_from_ce;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::raw;

/// Piecewise-constant λ over epochs.
///
/// The λ for an epoch is that of the last entry whose start epoch is at or
/// below it; epochs before the first entry use the first λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    entries: Vec<(usize, f64)>,
}

impl LambdaSchedule {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("lambda schedule needs at least one entry"));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(
                "lambda schedule epochs must be strictly increasing",
            ));
        }
        if let Some(&(_, l)) = entries.iter().find(|(_, l)| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid(format!(
                "schedule lambda must be >= 0, got {l}"
            )));
        }
        Ok(LambdaSchedule { entries })
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        Self::new(vec![(0, lambda)])
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.entries
            .iter()
            .rev()
            .find(|(start, _)| *start <= epoch)
            .unwrap_or(&self.entries[0])
            .1
    }

    pub fn max_lambda(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

impl FromStr for LambdaSchedule {
    type Err = Error;

    /// Parses `"epoch:lambda,epoch:lambda,..."`, e.g. `"0:1.0,30:0.5,50:0.2,70:0.1"`.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|part| {
                let (e, l) = part.split_once(':').ok_or_else(|| {
                    Error::invalid(format!("schedule entry {part:?} is not epoch:lambda"))
                })?;
                let epoch = e.trim().parse().map_err(|_| {
                    Error::invalid(format!("schedule epoch {e:?} is not an integer"))
                })?;
                let lambda = l.trim().parse().map_err(|_| {
                    Error::invalid(format!("schedule lambda {l:?} is not a number"))
                })?;
                Ok((epoch, lambda))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

impl fmt::Display for LambdaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (e, l)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}:{l}")?;
        }
        Ok(())
    }
}

/// Everything needed to reproduce a training run on a given dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub lambda_schedule: LambdaSchedule,
    /// Width of the rectifier layer; `None` trains a linear model.
    pub hidden_dim: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub sgd: SgdConfig,
    /// Epochs without improvement before the learning rate decays.
    pub plateau_patience: usize,
    /// Minimum drop in the epoch loss that counts as improvement.
    pub plateau_threshold: f64,
    pub lr_decay_factor: f64,
    pub min_learning_rate: f64,
    /// End the run when a plateau is hit with the learning rate already at
    /// its floor.
    pub stop_at_floor: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Ce,
            lambda_schedule: LambdaSchedule {
                entries: vec![(0, 0.0)],
            },
            hidden_dim: None,
            batch_size: 32,
            epochs: 100,
            sgd: SgdConfig::default(),
            plateau_patience: 5,
            plateau_threshold: 1e-4,
            lr_decay_factor: 0.1,
            min_learning_rate: 1e-5,
            stop_at_floor: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "lr decay factor must lie in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        if !(self.min_learning_rate > 0.0 && self.min_learning_rate.is_finite()) {
            return Err(Error::invalid("minimum learning rate must be > 0"));
        }
        if self.plateau_patience == 0 {
            return Err(Error::invalid("plateau patience must be positive"));
        }
        if self.loss == LossKind::Ls && self.lambda_schedule.max_lambda() > 1.0 {
            return Err(Error::invalid("label smoothing lambda must lie in [0, 1]"));
        }
        Ok(())
    }

    fn loss_at(&self, epoch: usize) -> Result<LossSpec> {
        LossSpec::new(self.loss, self.lambda_schedule.at(epoch))
    }
}

/// Accuracy and mean losses of a model on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_ce: f64,
    pub mean_entropy: f64,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

const EVAL_CHUNK: usize = 1024;

/// Argmax accuracy (ties to the lowest class index), mean cross-entropy and
/// mean prediction entropy over `dataset`.
pub fn evaluate(params: &ModelParams, dataset: &LabeledDataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    if dataset.class_count() != params.class_count() {
        return Err(Error::Shape {
            expected: format!("{} classes", params.class_count()),
            actual: format!("{} classes", dataset.class_count()),
        });
    }
    let features = dataset.features();
    let labels = dataset.labels();
    let mut probs = vec![0.0; params.class_count()];
    let (mut hits, mut ce, mut h) = (0usize, 0.0, 0.0);
    for (chunk_idx, chunk) in features.axis_chunks_iter(Axis(0), EVAL_CHUNK).enumerate() {
        let logits = params.forward(chunk)?;
        let offset = chunk_idx * EVAL_CHUNK;
        for (i, z) in logits.rows().into_iter().enumerate() {
            let z = z.as_slice().expect("logit rows are contiguous");
            let y = labels[offset + i];
            if argmax(z) == y {
                hits += 1;
            }
            raw::softmax_into(z, &mut probs);
            ce += raw::cross_entropy(&probs, y);
            h += raw::entropy(&probs);
        }
    }
    let n = dataset.len() as f64;
    Ok(Evaluation {
        accuracy: hits as f64 / n,
        mean_ce: ce / n,
        mean_entropy: h / n,
    })
}

/// One row of the training trace. Epoch 0 describes the initialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    /// Mean training cross-entropy after the epoch, in nats.
    pub train_ce: f64,
    /// Mean prediction entropy on the training set, in nats.
    pub train_entropy: f64,
    /// Mean value of the loss being optimized.
    pub train_objective: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub eval_ce: Option<f64>,
}

/// Per-epoch trace of a run. Losses are measured on the full training set
/// after each epoch with the labels used for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epochs: Vec<EpochMetrics>,
    pub stopped_early: bool,
}

impl TrainMetrics {
    pub fn last(&self) -> &EpochMetrics {
        self.epochs
            .last()
            .expect("metrics always hold the initial epoch")
    }

    /// `e^{-CE}` of the final epoch's mean training cross-entropy.
    pub fn experimental_cpp(&self) -> f64 {
        cpp_from_ce(self.last().train_ce).unwrap_or(f64::NAN)
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub metrics: TrainMetrics,
}

/// A run that failed part-way, with whatever metrics were recorded.
#[derive(Debug, thiserror::Error)]
#[error("{source}")]
pub struct TrainError {
    #[source]
    pub source: Error,
    pub partial: Option<TrainMetrics>,
}

impl From<Error> for TrainError {
    fn from(source: Error) -> Self {
        TrainError {
            source,
            partial: None,
        }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        e.source
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mixed = seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn measure(
    params: &ModelParams,
    train_set: &LabeledDataset,
    eval_set: Option<&LabeledDataset>,
    loss: LossSpec,
    epoch: usize,
    learning_rate: f64,
) -> Result<EpochMetrics> {
    let train = evaluate(params, train_set)?;
    let objective = objective_on(
        params,
        train_set.features().view(),
        train_set.labels(),
        loss,
    )?;
    let eval = eval_set.map(|ds| evaluate(params, ds)).transpose()?;
    Ok(EpochMetrics {
        epoch,
        lambda: loss.effective_lambda(),
        learning_rate,
        train_ce: train.mean_ce,
        train_entropy: train.mean_entropy,
        train_objective: objective,
        train_accuracy: train.accuracy,
        eval_accuracy: eval.map(|e| e.accuracy),
        eval_ce: eval.map(|e| e.mean_ce),
    })
}

fn objective_on(
    params: &ModelParams,
    x: ArrayView2<f64>,
    labels: &[usize],
    loss: LossSpec,
) -> Result<f64> {
    let logits = params.forward(x)?;
    let mut probs = vec![0.0; params.class_count()];
    let mut scratch = vec![0.0; params.class_count()];
    let mut total = 0.0;
    for (z, &y) in logits.rows().into_iter().zip(labels) {
        raw::softmax_into(z.as_slice().expect("logit rows are contiguous"), &mut probs);
        total += loss.sample(&probs, y, &mut scratch).2;
    }
    Ok(total / labels.len() as f64)
}

fn finite_metrics(m: &EpochMetrics) -> bool {
    m.train_ce.is_finite() && m.train_entropy.is_finite() && m.train_objective.is_finite()
}

/// Minibatch SGD on `train_set`, reshuffled every epoch.
///
/// The learning rate is multiplied by `lr_decay_factor` (down to
/// `min_learning_rate`) whenever the end-of-epoch training objective has
/// not improved by `plateau_threshold` for `plateau_patience` epochs. A
/// change of λ resets the plateau tracker. Identical inputs give identical
/// metrics.
pub fn train(
    config: &TrainConfig,
    train_set: &LabeledDataset,
    eval_set: Option<&LabeledDataset>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty").into());
    }
    if let Some(ev) = eval_set {
        if ev.feature_dim() != train_set.feature_dim()
            || ev.class_count() != train_set.class_count()
        {
            return Err(Error::Shape {
                expected: format!(
                    "{} features, {} classes",
                    train_set.feature_dim(),
                    train_set.class_count()
                ),
                actual: format!(
                    "{} features, {} classes",
                    ev.feature_dim(),
                    ev.class_count()
                ),
            }
            .into());
        }
    }

    let mut params = ModelParams::init(
        train_set.feature_dim(),
        config.hidden_dim,
        train_set.class_count(),
        config.seed,
    )?;
    let mut opt = OptimizerState::new(&params, config.sgd)?;
    let mut metrics = TrainMetrics {
        epochs: vec![measure(
            &params,
            train_set,
            eval_set,
            config.loss_at(0)?,
            0,
            opt.learning_rate,
        )?],
        stopped_early: false,
    };

    let features = train_set.features();
    let labels = train_set.labels();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut current_lambda = f64::NAN;
    let mut batch_labels = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        // Epoch `epoch` is the `epoch - 1`-th pass; the schedule is indexed
        // by passes completed.
        let loss = config.loss_at(epoch - 1)?;
        if loss.lambda != current_lambda {
            current_lambda = loss.lambda;
            best = f64::INFINITY;
            stale = 0;
        }
        order.shuffle(&mut epoch_rng(config.seed, epoch));
        for chunk in order.chunks(config.batch_size) {
            let x = features.select(Axis(0), chunk);
            batch_labels.clear();
            batch_labels.extend(chunk.iter().map(|&i| labels[i]));
            let step = backward(&params, x.view(), &batch_labels, loss)
                .and_then(|(grads, _)| sgd_step(&mut params, &grads, &mut opt));
            if let Err(source) = step {
                return Err(TrainError {
                    source,
                    partial: Some(metrics),
                });
            }
        }

        let row = measure(&params, train_set, eval_set, loss, epoch, opt.learning_rate)?;
        if !finite_metrics(&row) {
            metrics.epochs.push(row);
            return Err(TrainError {
                source: Error::Numerical(format!(
                    "training loss became non-finite at epoch {epoch}"
                )),
                partial: Some(metrics),
            });
        }
        let objective = row.train_objective;
        metrics.epochs.push(row);

        if objective < best - config.plateau_threshold {
            best = objective;
            stale = 0;
        } else {
            best = best.min(objective);
            stale += 1;
            if stale >= config.plateau_patience {
                stale = 0;
                if opt.learning_rate <= config.min_learning_rate * (1.0 + 1e-12) {
                    if config.stop_at_floor {
                        metrics.stopped_early = true;
                        break;
                    }
                } else {
                    opt.learning_rate =
                        (opt.learning_rate * config.lr_decay_factor).max(config.min_learning_rate);
                }
            }
        }
    }
    Ok(TrainOutcome { params, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn schedule_semantics() {
        let s: LambdaSchedule = "30:0.5,50:0.2,70:0.1".parse().unwrap();
        assert_eq!(s.at(0), 0.5);
        assert_eq!(s.at(29), 0.5);
        assert_eq!(s.at(30), 0.5);
        assert_eq!(s.at(50), 0.2);
        assert_eq!(s.at(69), 0.2);
        assert_eq!(s.at(1000), 0.1);
        let s: LambdaSchedule = "0:1.0,30:0.5,50:0.2,70:0.1".parse().unwrap();
        assert_eq!(s.at(10), 1.0);
        assert_eq!(s.to_string(), "0:1,30:0.5,50:0.2,70:0.1");
        assert!("10:0.5,5:0.1".parse::<LambdaSchedule>().is_err());
        assert!("10:0.5,10:0.1".parse::<LambdaSchedule>().is_err());
        assert!("0:-1".parse::<LambdaSchedule>().is_err());
        assert!("0=1".parse::<LambdaSchedule>().is_err());
        assert!("".parse::<LambdaSchedule>().is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[1.0, 2.0, 5.0]), 2);
    }

    #[test]
    fn uniform_model_accuracy_is_share_of_class_zero() {
        let params = ModelParams::zeros(2, None, 4);
        let ds = LabeledDataset::new(
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [0.0, 1.0]],
            vec![0, 1, 0, 3, 2],
            4,
        )
        .unwrap();
        let e = evaluate(&params, &ds).unwrap();
        assert_eq!(e.accuracy, 0.4);
        assert!((e.mean_ce - 4f64.ln()).abs() < 1e-12);
        assert!((e.mean_entropy - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_logits() {
        let mut params = ModelParams::zeros(3, None, 3);
        params.output.weights = ndarray::Array2::eye(3) * 60.0;
        let ds = LabeledDataset::new(ndarray::Array2::eye(3), vec![0, 1, 2], 3).unwrap();
        let e = evaluate(&params, &ds).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert!(e.mean_ce < 1e-20);
    }

    #[test]
    fn zero_epochs_reports_initial_model() {
        let ds = LabeledDataset::new(array![[0.0, 1.0], [1.0, 0.0]], vec![0, 1], 2).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &ds, None).unwrap();
        assert_eq!(out.metrics.epochs.len(), 1);
        assert_eq!(out.metrics.epochs[0].epoch, 0);
        let init = ModelParams::init(2, None, 2, cfg.seed).unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn plateau_decays_learning_rate() {
        // Two identical points with conflicting labels: the loss cannot
        // improve past ln 2, so the learning rate must walk down to the floor.
        let ds = LabeledDataset::new(array![[1.0], [1.0]], vec![0, 1], 2).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 2,
            plateau_patience: 3,
            sgd: SgdConfig {
                learning_rate: 0.1,
                momentum: 0.0,
                weight_decay: 0.0,
            },
            stop_at_floor: true,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &ds, None).unwrap();
        assert!(out.metrics.stopped_early);
        assert!((out.metrics.last().learning_rate - 1e-5).abs() < 1e-18);
        let rates: Vec<f64> = out.metrics.epochs.iter().map(|m| m.learning_rate).collect();
        assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn divergence_reports_partial_metrics() {
        let ds =
            LabeledDataset::new(array![[1e150, -1e150], [-1e150, 1e150]], vec![0, 1], 2).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            sgd: SgdConfig {
                learning_rate: 1e10,
                momentum: 0.0,
                weight_decay: 0.0,
            },
            ..TrainConfig::default()
        };
        let err = train(&cfg, &ds, None).unwrap_err();
        assert!(matches!(err.source, Error::Numerical(_)), "{err}");
        assert!(err.partial.is_some());
    }
}
