//! Where training with the regularized loss converges.
//!
//! Minimizing `-ln p_y + λ Σ p_i ln p_i` over the simplex gives a distribution
//! with mass `p_y` on the label and equal mass on every other class, where
//!
//! ```text
//! p_neg = p_y · exp(-1 / (λ p_y))
//! λ     = m / ln((C - 1) / (m - 1)),   m = 1 / p_y
//! ```
//!
//! [`lambda_for_cpp`] evaluates the second relation directly and
//! [`cpp_for_lambda`] inverts it by bisection. [`simplex_oracle`] minimizes
//! the objective numerically without using either relation, so the two can
//! be checked against each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ClassLabel, ProbDistribution, SIMPLEX_TOLERANCE};

/// One point of the λ ↔ positive-class probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    /// Convergence probability of the positive class.
    pub cpp: f64,
    pub class_count: usize,
}

/// The converged prediction: `positive` on the label, `negative` on each of
/// the other `class_count - 1` classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergedDistribution {
    pub positive: f64,
    pub negative: f64,
    pub class_count: usize,
}

impl ConvergedDistribution {
    pub fn total_mass(&self) -> f64 {
        self.positive + (self.class_count - 1) as f64 * self.negative
    }

    pub fn to_distribution(&self, label: ClassLabel) -> Result<ProbDistribution> {
        label.check(self.class_count)?;
        let mut probs = vec![self.negative; self.class_count];
        probs[label.index()] = self.positive;
        ProbDistribution::new(probs)
    }
}

/// A point on the probability simplex returned by [`simplex_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_distribution(self) -> Result<ProbDistribution> {
        ProbDistribution::new(self.probs)
    }
}

fn check_class_count(class_count: usize) -> Result<()> {
    if class_count < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 classes, got {class_count}"
        )));
    }
    Ok(())
}

/// `λ = m / ln((C−1)/(m−1))` with `m = 1/cpp`.
///
/// Defined for `1/C < cpp < 1`; λ grows without bound as `cpp` approaches
/// `1/C` from above.
pub fn lambda_for_cpp(cpp: f64, class_count: usize) -> Result<f64> {
    check_class_count(class_count)?;
    let c = class_count as f64;
    if !cpp.is_finite() || cpp >= 1.0 {
        return Err(Error::Domain(format!("cpp must be < 1, got {cpp}")));
    }
    if cpp <= 1.0 / c {
        return Err(Error::Domain(format!(
            "cpp {cpp} is at or below the uniform probability 1/{class_count}"
        )));
    }
    let m = 1.0 / cpp;
    // m - 1 computed as (1 - cpp) / cpp keeps precision when cpp is near 1.
    let excess = (1.0 - cpp) / cpp;
    let denom = ((c - 1.0) / excess).ln();
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "cpp {cpp} is too close to 1/{class_count} for a finite lambda"
        )));
    }
    Ok(m / denom)
}

/// Maximum bisection steps for [`cpp_for_lambda`].
pub const MAX_BISECTION_STEPS: usize = 200;

/// Inverse of [`lambda_for_cpp`]: the positive-class probability at which
/// the regularized loss settles for a given λ.
///
/// Writing `m = 1 + u`, the relation becomes `λ ln((C−1)/u) = 1 + u`, which is
/// strictly monotone in `t = ln u`. Bisection runs on `t` so that tiny `u`
/// (λ close to zero, `p_y` close to one) is resolved without cancellation.
pub fn cpp_for_lambda(lambda: f64, class_count: usize) -> Result<f64> {
    check_class_count(class_count)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "lambda must be finite and > 0, got {lambda}"
        )));
    }
    let c = class_count as f64;
    let ln_neg = (c - 1.0).ln();
    // Decreasing in t; positive at `lo`, negative at `hi`.
    let residual = |t: f64| lambda * (ln_neg - t) - 1.0 - t.exp();
    let mut hi = ln_neg;
    let mut lo = ln_neg - (2.0 + c) / lambda;
    debug_assert!(residual(lo) > 0.0 && residual(hi) < 0.0);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    if !(hi - lo).is_finite() || hi - lo > 1e-9 {
        return Err(Error::Numerical(format!(
            "bisection for lambda {lambda}, C {class_count} did not converge"
        )));
    }
    Ok(1.0 / (1.0 + t.exp()))
}

/// The full converged distribution for `lambda` and `class_count`.
pub fn converged_distribution(lambda: f64, class_count: usize) -> Result<ConvergedDistribution> {
    let positive = cpp_for_lambda(lambda, class_count)?;
    let negative = positive * (-1.0 / (lambda * positive)).exp();
    Ok(ConvergedDistribution {
        positive,
        negative,
        class_count,
    })
}

/// Curve rows for every (λ, C) pair, grouped by class count.
pub fn curve(lambdas: &[f64], class_counts: &[usize]) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::with_capacity(lambdas.len() * class_counts.len());
    for &class_count in class_counts {
        for &lambda in lambdas {
            points.push(CurvePoint {
                lambda,
                cpp: cpp_for_lambda(lambda, class_count)?,
                class_count,
            });
        }
    }
    Ok(points)
}

/// `n` values spaced evenly in log between `lo` and `hi`, inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!(
            "log grid needs 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("log grid needs at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Experimental positive-class probability `e^{-L_CE}` from a mean training
/// cross-entropy.
pub fn cpp_from_ce(mean_ce_loss: f64) -> Result<f64> {
    if !mean_ce_loss.is_finite() || mean_ce_loss < 0.0 {
        return Err(Error::invalid(format!(
            "mean cross-entropy must be finite and >= 0, got {mean_ce_loss}"
        )));
    }
    Ok((-mean_ce_loss).exp())
}

/// Label-mass of the smoothed target, `1 − λ + λ/C`.
pub fn ls_cpp(lambda_ls: f64, class_count: usize) -> Result<f64> {
    check_class_count(class_count)?;
    if !(0.0..=1.0).contains(&lambda_ls) {
        return Err(Error::invalid(format!(
            "label smoothing lambda must lie in [0, 1], got {lambda_ls}"
        )));
    }
    Ok(1.0 - lambda_ls + lambda_ls / class_count as f64)
}

/// Label smoothing coefficient for a target CPP.
///
/// With `exact` false this is the customary `1 − cpp`, which leaves the
/// smoothed target slightly above `cpp`. With `exact` true it is the true
/// inverse of [`ls_cpp`], `(1 − cpp) / (1 − 1/C)`.
pub fn ls_lambda_for_cpp(cpp: f64, class_count: usize, exact: bool) -> Result<f64> {
    check_class_count(class_count)?;
    let c = class_count as f64;
    if !(cpp > 1.0 / c && cpp <= 1.0) {
        return Err(Error::Domain(format!(
            "cpp must lie in (1/{class_count}, 1], got {cpp}"
        )));
    }
    Ok(if exact {
        (1.0 - cpp) / (1.0 - 1.0 / c)
    } else {
        1.0 - cpp
    })
}

/// Settings for [`simplex_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Mirror-descent step size.
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the largest coordinate change in one step falls below this.
    pub tolerance: f64,
    /// Start from a random interior point instead of the uniform
    /// distribution, so that symmetry among negatives is not inherited.
    pub jitter_seed: Option<u64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            step: 0.05,
            max_iters: 200_000,
            tolerance: 1e-12,
            jitter_seed: None,
        }
    }
}

/// Steps the loss may rise in a row before the oracle gives up.
const DIVERGENCE_PATIENCE: usize = 100;

fn simplex_objective(probs: &[f64], label: usize, lambda: f64) -> f64 {
    let neg_entropy: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    -probs[label].ln() + lambda * neg_entropy
}

/// Minimizes `-ln p_y + λ Σ p_i ln p_i` over the simplex by exponentiated
/// gradient descent, carrying log-weights so coordinates never leave the
/// interior.
pub fn simplex_oracle(
    label: ClassLabel,
    lambda: f64,
    class_count: usize,
    options: OracleOptions,
) -> Result<SimplexPoint> {
    check_class_count(class_count)?;
    label.check(class_count)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if !(options.step > 0.0 && options.step.is_finite()) {
        return Err(Error::invalid(format!(
            "step must be > 0, got {}",
            options.step
        )));
    }
    let y = label.index();

    let mut log_w: Vec<f64> = match options.jitter_seed {
        None => vec![0.0; class_count],
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..class_count)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        }
    };
    let mut probs = vec![0.0; class_count];
    normalize_log_weights(&mut log_w, &mut probs);

    let mut loss = simplex_objective(&probs, y, lambda);
    let mut rising = 0usize;
    let mut next = vec![0.0; class_count];

    for _ in 0..options.max_iters {
        for (i, w) in log_w.iter_mut().enumerate() {
            // ∂L/∂p_i = λ(ln p_i + 1) − [i = y] / p_y, with ln p_i = w_i
            // after normalization.
            let mut grad = lambda * (*w + 1.0);
            if i == y {
                grad -= 1.0 / probs[y];
            }
            *w -= options.step * grad;
        }
        normalize_log_weights(&mut log_w, &mut next);
        if next.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "simplex oracle produced non-finite values; try a step below {}",
                options.step
            )));
        }
        let change = probs
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut probs, &mut next);

        let new_loss = simplex_objective(&probs, y, lambda);
        if new_loss > loss {
            rising += 1;
            if rising >= DIVERGENCE_PATIENCE {
                return Err(Error::Numerical(format!(
                    "simplex oracle diverged (loss rose {DIVERGENCE_PATIENCE} steps in a row); \
                     try a step below {}",
                    options.step
                )));
            }
        } else {
            rising = 0;
        }
        loss = new_loss;

        if change < options.tolerance {
            let total: f64 = probs.iter().sum();
            debug_assert!((total - 1.0).abs() < SIMPLEX_TOLERANCE);
            return Ok(SimplexPoint { probs });
        }
    }
    Err(Error::Numerical(format!(
        "simplex oracle did not converge in {} iterations",
        options.max_iters
    )))
}

/// Shifts `log_w` so that it holds log-probabilities and writes the
/// probabilities to `probs`.
fn normalize_log_weights(log_w: &mut [f64], probs: &mut [f64]) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    let log_z = max + total.ln();
    for (w, p) in log_w.iter_mut().zip(probs.iter_mut()) {
        *w -= log_z;
        *p = w.exp();
    }
}
