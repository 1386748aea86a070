use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{raw, LossBreakdown};

/// Which loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Plain cross-entropy; λ is ignored.
    Ce,
    /// Cross-entropy minus λ times the prediction entropy.
    Mer,
    /// Cross-entropy against a label-smoothed target with coefficient λ.
    Ls,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Mer => "mer",
            LossKind::Ls => "ls",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" => Ok(LossKind::Ce),
            "mer" => Ok(LossKind::Mer),
            "ls" => Ok(LossKind::Ls),
            other => Err(Error::invalid(format!(
                "unknown loss kind {other:?} (expected ce, mer or ls)"
            ))),
        }
    }
}

/// One affine layer, `y = W x + b` with `W` stored as (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn uniform(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Dense {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || {
                rng.random_range(-bound..=bound)
            }),
            bias: Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..=bound)),
        }
    }

    /// Output rows are always contiguous.
    fn apply(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let out = input.dot(&self.weights.t()) + &self.bias;
        if out.is_standard_layout() {
            out
        } else {
            out.as_standard_layout().into_owned()
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Parameters of a linear classifier or a one-hidden-layer rectifier MLP.
///
/// The same type holds gradients and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: Option<Dense>,
    pub output: Dense,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(input_dim: usize, hidden_dim: Option<usize>, class_count: usize) -> Self {
        match hidden_dim {
            Some(h) => ModelParams {
                hidden: Some(Dense::zeros(input_dim, h)),
                output: Dense::zeros(h, class_count),
            },
            None => ModelParams {
                hidden: None,
                output: Dense::zeros(input_dim, class_count),
            },
        }
    }

    /// Every weight and bias drawn uniformly from `±1/√fan_in` of its layer.
    pub fn init(
        input_dim: usize,
        hidden_dim: Option<usize>,
        class_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || class_count < 2 || hidden_dim == Some(0) {
            return Err(Error::invalid(format!(
                "bad model shape: input {input_dim}, hidden {hidden_dim:?}, classes {class_count}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match hidden_dim {
            Some(h) => ModelParams {
                hidden: Some(Dense::uniform(input_dim, h, &mut rng)),
                output: Dense::uniform(h, class_count, &mut rng),
            },
            None => ModelParams {
                hidden: None,
                output: Dense::uniform(input_dim, class_count, &mut rng),
            },
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            hidden: self
                .hidden
                .as_ref()
                .map(|l| Dense::zeros(l.inputs(), l.outputs())),
            output: Dense::zeros(self.output.inputs(), self.output.outputs()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.output).inputs()
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        self.hidden.as_ref().map(Dense::outputs)
    }

    pub fn class_count(&self) -> usize {
        self.output.outputs()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain(std::iter::once(&self.output))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.output))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every parameter, layer by layer: weights row-major, then bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers().count() == other.layers().count()
            && self
                .layers()
                .zip(other.layers())
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.len() == b.bias.len())
    }

    fn check_batch(&self, batch: ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: format!("{} feature columns", self.input_dim()),
                actual: format!("{} feature columns", batch.ncols()),
            });
        }
        Ok(())
    }

    /// Logits for every row of `batch`, shape (rows, classes).
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        Ok(match &self.hidden {
            Some(hidden) => {
                let act = hidden.apply(batch).mapv_into(relu);
                self.output.apply(act.view())
            }
            None => self.output.apply(batch),
        })
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Logit-level loss selection with its coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lambda: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if kind == LossKind::Ls && lambda > 1.0 {
            return Err(Error::invalid(format!(
                "label smoothing lambda must lie in [0, 1], got {lambda}"
            )));
        }
        Ok(LossSpec { kind, lambda })
    }

    /// The coefficient that actually enters the loss (zero for plain CE).
    pub fn effective_lambda(&self) -> f64 {
        match self.kind {
            LossKind::Ce => 0.0,
            LossKind::Mer | LossKind::Ls => self.lambda,
        }
    }

    /// Per-sample objective and its logit gradient, written into `grad`.
    /// Returns (ce, entropy, objective).
    pub(crate) fn sample(&self, probs: &[f64], label: usize, grad: &mut [f64]) -> (f64, f64, f64) {
        let ce = raw::cross_entropy(probs, label);
        let h = raw::entropy(probs);
        let lambda = self.effective_lambda();
        let objective = match self.kind {
            LossKind::Ce | LossKind::Mer => {
                raw::regularized_gradient_into(probs, label, lambda, grad);
                ce - lambda * h
            }
            LossKind::Ls => {
                raw::label_smoothing_gradient_into(probs, label, lambda, grad);
                raw::label_smoothing_loss(probs, label, lambda)
            }
        };
        (ce, h, objective)
    }
}

/// Mean per-sample loss of `params` on a batch, without gradients.
pub fn batch_loss(
    params: &ModelParams,
    batch: ArrayView2<f64>,
    labels: &[usize],
    loss: LossSpec,
) -> Result<LossBreakdown> {
    let (breakdown, _) = loss_and_logit_grads(params, batch, labels, loss)?;
    Ok(breakdown)
}

fn check_labels(params: &ModelParams, batch: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
    if labels.len() != batch.nrows() {
        return Err(Error::Shape {
            expected: format!("{} labels", batch.nrows()),
            actual: format!("{} labels", labels.len()),
        });
    }
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let c = params.class_count();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    Ok(())
}

/// Mean loss breakdown and the logit gradient of the mean loss.
fn loss_and_logit_grads(
    params: &ModelParams,
    batch: ArrayView2<f64>,
    labels: &[usize],
    loss: LossSpec,
) -> Result<(LossBreakdown, Array2<f64>)> {
    check_labels(params, batch, labels)?;
    let logits = params.forward(batch)?;
    let (ce, h, obj, grads) = logit_grads_from(&logits, labels, loss);
    let lambda = loss.effective_lambda();
    Ok((
        LossBreakdown {
            ce,
            entropy: h,
            lambda,
            total: obj,
        },
        grads,
    ))
}

fn logit_grads_from(
    logits: &Array2<f64>,
    labels: &[usize],
    loss: LossSpec,
) -> (f64, f64, f64, Array2<f64>) {
    let n = logits.nrows();
    let c = logits.ncols();
    let mut grads = Array2::zeros((n, c));
    let mut probs = vec![0.0; c];
    let mut g = vec![0.0; c];
    let (mut ce, mut h, mut obj) = (0.0, 0.0, 0.0);
    for ((z, mut out), &y) in logits.rows().into_iter().zip(grads.rows_mut()).zip(labels) {
        raw::softmax_into(z.as_slice().expect("logit rows are contiguous"), &mut probs);
        let (sce, sh, sobj) = loss.sample(&probs, y, &mut g);
        ce += sce;
        h += sh;
        obj += sobj;
        for (o, v) in out.iter_mut().zip(&g) {
            *o = v / n as f64;
        }
    }
    let nf = n as f64;
    (ce / nf, h / nf, obj / nf, grads)
}

/// Gradients of the mean per-sample loss with respect to every parameter,
/// plus the mean loss breakdown.
///
/// For [`LossKind::Ls`] the breakdown's `total` is the smoothed-target
/// cross-entropy; `ce` and `entropy` are always the plain quantities.
pub fn backward(
    params: &ModelParams,
    batch: ArrayView2<f64>,
    labels: &[usize],
    loss: LossSpec,
) -> Result<(ModelParams, LossBreakdown)> {
    check_labels(params, batch, labels)?;
    params.check_batch(batch)?;
    let hidden_pre = params.hidden.as_ref().map(|l| l.apply(batch));
    let hidden_act = hidden_pre.as_ref().map(|a| a.mapv(relu));
    let out_input = hidden_act.as_ref().map_or(batch, |a| a.view());
    let logits = params.output.apply(out_input);
    let (ce, h, obj, d_logits) = logit_grads_from(&logits, labels, loss);

    let output = Dense {
        weights: d_logits.t().dot(&out_input),
        bias: d_logits.sum_axis(Axis(0)),
    };
    let hidden = match (&params.hidden, &hidden_pre) {
        (Some(_), Some(pre)) => {
            let mut d_act = d_logits.dot(&params.output.weights);
            Zip::from(&mut d_act).and(pre).for_each(|d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
            Some(Dense {
                weights: d_act.t().dot(&batch),
                bias: d_act.sum_axis(Axis(0)),
            })
        }
        _ => None,
    };
    Ok((
        ModelParams { hidden, output },
        LossBreakdown {
            ce,
            entropy: h,
            lambda: loss.effective_lambda(),
            total: obj,
        },
    ))
}
