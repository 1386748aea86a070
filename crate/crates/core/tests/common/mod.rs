//! Reference implementations written independently of the library, used as
//! oracles by several test targets.

#![allow(dead_code)]

use mer::classifier::{LossKind, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Naive softmax via explicit max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Per-sample loss of the given kind on logits `z`.
pub fn sample_loss(z: &[f64], y: usize, kind: LossKind, lambda: f64) -> f64 {
    let p = softmax(z);
    let ce = -p[y].ln();
    match kind {
        LossKind::Ce => ce,
        LossKind::Mer => {
            let h: f64 = -p.iter().map(|q| q * q.ln()).sum::<f64>();
            ce - lambda * h
        }
        LossKind::Ls => {
            let c = p.len() as f64;
            p.iter()
                .enumerate()
                .map(|(i, q)| {
                    let t = if i == y {
                        1.0 - lambda + lambda / c
                    } else {
                        lambda / c
                    };
                    -t * q.ln()
                })
                .sum()
        }
    }
}

/// Mean loss of an MLP written with plain loops.
pub fn model_loss(
    params: &ModelParams,
    x: &[Vec<f64>],
    labels: &[usize],
    kind: LossKind,
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for (row, &y) in x.iter().zip(labels) {
        let mut input = row.clone();
        if let Some(h) = &params.hidden {
            input = (0..h.weights.nrows())
                .map(|j| {
                    let a: f64 = (0..row.len())
                        .map(|k| h.weights[[j, k]] * row[k])
                        .sum::<f64>()
                        + h.bias[j];
                    a.max(0.0)
                })
                .collect();
        }
        let o = &params.output;
        let z: Vec<f64> = (0..o.weights.nrows())
            .map(|c| {
                (0..input.len())
                    .map(|k| o.weights[[c, k]] * input[k])
                    .sum::<f64>()
                    + o.bias[c]
            })
            .collect();
        total += sample_loss(&z, y, kind, lambda);
    }
    total / x.len() as f64
}

/// Central-difference gradient of [`model_loss`] over every parameter, in
/// the order of `ModelParams::iter`.
pub fn fd_model_grad(
    params: &ModelParams,
    x: &[Vec<f64>],
    labels: &[usize],
    kind: LossKind,
    lambda: f64,
    h: f64,
) -> Vec<f64> {
    let n = params.param_count();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = params.clone();
        *plus.iter_mut().nth(i).unwrap() += h;
        let mut minus = params.clone();
        *minus.iter_mut().nth(i).unwrap() -= h;
        out.push(
            (model_loss(&plus, x, labels, kind, lambda)
                - model_loss(&minus, x, labels, kind, lambda))
                / (2.0 * h),
        );
    }
    out
}

/// Central-difference gradient of [`sample_loss`] over the logits.
pub fn fd_logit_grad(z: &[f64], y: usize, kind: LossKind, lambda: f64, h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut a = z.to_vec();
            let mut b = z.to_vec();
            a[i] += h;
            b[i] -= h;
            (sample_loss(&a, y, kind, lambda) - sample_loss(&b, y, kind, lambda)) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

/// Smallest |pre-activation| of the hidden layer over the batch; finite
/// differences straddling a ReLU kink are meaningless.
pub fn min_abs_preactivation(params: &ModelParams, x: &[Vec<f64>]) -> f64 {
    let Some(h) = &params.hidden else {
        return f64::INFINITY;
    };
    let mut m = f64::INFINITY;
    for row in x {
        for j in 0..h.weights.nrows() {
            let a: f64 = (0..row.len())
                .map(|k| h.weights[[j, k]] * row[k])
                .sum::<f64>()
                + h.bias[j];
            m = m.min(a.abs());
        }
    }
    m
}

/// A random model, batch and labels.
pub struct GradCase {
    pub params: ModelParams,
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub kind: LossKind,
    pub lambda: f64,
}

impl GradCase {
    /// Redraws until every predicted probability exceeds 1e-8 and no hidden
    /// pre-activation lies within 1e-3 of the ReLU kink, so the naive
    /// oracle is smooth and never touches the library's log floor.
    pub fn random(
        seed: u64,
        input: usize,
        hidden: Option<usize>,
        classes: usize,
        batch: usize,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut params = ModelParams::init(input, hidden, classes, rng.random()).unwrap();
            // Larger weights than the default init, so probabilities are far
            // from uniform and the entropy terms matter.
            for v in params.iter_mut() {
                *v *= rng.random_range(0.5..2.5);
            }
            let x: Vec<Vec<f64>> = (0..batch)
                .map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let labels = (0..batch).map(|_| rng.random_range(0..classes)).collect();
            let kind = [LossKind::Ce, LossKind::Mer, LossKind::Ls][rng.random_range(0..3)];
            let lambda = match kind {
                LossKind::Ce => 0.0,
                LossKind::Mer => rng.random_range(0.0..3.0),
                LossKind::Ls => rng.random_range(0.0..1.0),
            };
            let case = GradCase {
                params,
                x,
                labels,
                kind,
                lambda,
            };
            if case.min_prob() > 1e-8 && min_abs_preactivation(&case.params, &case.x) > 1e-3 {
                return case;
            }
        }
    }

    fn min_prob(&self) -> f64 {
        let logits = self.params.forward(self.batch().view()).unwrap();
        logits
            .rows()
            .into_iter()
            .flat_map(|z| softmax(&z.to_vec()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn batch(&self) -> ndarray::Array2<f64> {
        let cols = self.x[0].len();
        ndarray::Array2::from_shape_vec((self.x.len(), cols), self.x.concat()).unwrap()
    }
}
