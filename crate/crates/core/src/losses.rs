//! Softmax, cross-entropy, entropy and the maximum-entropy-regularized loss,
//! together with their analytic gradients with respect to the logits.
//!
//! Every logarithm is natural and every probability is clamped to
//! [`LOG_FLOOR`] before it is logged, so `0 · ln 0` evaluates to `0`.
//!
//! The typed functions validate their inputs. The [`raw`] module exposes the
//! same kernels over plain slices for hot loops that already hold valid data.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Lower clamp applied to a probability before taking its logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Tolerance on `Σ p_i = 1` accepted by [`ProbDistribution::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Raw per-class scores produced by a model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "logit {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(LogitVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A point on the probability simplex, typically the output of [`softmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDistribution(Vec<f64>);

impl ProbDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid(format!(
                "distribution needs at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(i) = probs
            .iter()
            .position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::invalid(format!(
                "probability {i} is outside [0, 1] ({})",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(ProbDistribution(probs))
    }

    pub fn uniform(class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::invalid("uniform distribution needs C >= 2"));
        }
        Ok(ProbDistribution(vec![
            1.0 / class_count as f64;
            class_count
        ]))
    }

    pub fn one_hot(class_count: usize, label: ClassLabel) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::invalid("one-hot distribution needs C >= 2"));
        }
        label.check(class_count)?;
        let mut probs = vec![0.0; class_count];
        probs[label.index()] = 1.0;
        Ok(ProbDistribution(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.0.len()
    }
}

/// Index of the ground-truth class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub const fn new(index: usize) -> Self {
        ClassLabel(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub fn check(self, class_count: usize) -> Result<()> {
        if self.0 >= class_count {
            Err(Error::invalid(format!(
                "label {} out of range for {class_count} classes",
                self.0
            )))
        } else {
            Ok(())
        }
    }
}

impl From<usize> for ClassLabel {
    fn from(index: usize) -> Self {
        ClassLabel(index)
    }
}

/// The pieces of the regularized loss for one sample (or a batch mean).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    /// Cross-entropy `-ln p_y`, in nats.
    pub ce: f64,
    /// Shannon entropy of the prediction, in nats.
    pub entropy: f64,
    pub lambda: f64,
    /// `ce - lambda * entropy`.
    pub total: f64,
}

/// Gradient of a loss with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn check_smoothing(lambda_ls: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda_ls) {
        return Err(Error::invalid(format!(
            "label smoothing lambda must lie in [0, 1], got {lambda_ls}"
        )));
    }
    Ok(())
}

/// Unchecked slice kernels. Callers guarantee that `p` is a distribution,
/// `label < p.len()` and output buffers have the same length as the input.
pub mod raw {
    use super::LOG_FLOOR;

    #[inline]
    pub fn floored_ln(p: f64) -> f64 {
        p.max(LOG_FLOOR).ln()
    }

    /// Max-subtracted softmax of `logits` written into `out`.
    pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &z) in out.iter_mut().zip(logits) {
            *o = (z - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    pub fn cross_entropy(p: &[f64], label: usize) -> f64 {
        -floored_ln(p[label])
    }

    pub fn entropy(p: &[f64]) -> f64 {
        let h = -p.iter().map(|&q| q * floored_ln(q)).sum::<f64>();
        h.max(0.0)
    }

    /// `q (1 + λ ln q + λ H(p))`, with `entropy = H(p)` precomputed.
    #[inline]
    pub fn cell(q: f64, entropy: f64, lambda: f64) -> f64 {
        q * (1.0 + lambda * (floored_ln(q) + entropy))
    }

    pub fn regularized_gradient_into(p: &[f64], label: usize, lambda: f64, out: &mut [f64]) {
        let h = entropy(p);
        for (o, &q) in out.iter_mut().zip(p) {
            *o = cell(q, h, lambda);
        }
        out[label] -= 1.0;
    }

    pub fn smoothed_target_into(class_count: usize, label: usize, lambda_ls: f64, out: &mut [f64]) {
        let background = lambda_ls / class_count as f64;
        out.iter_mut().for_each(|t| *t = background);
        out[label] += 1.0 - lambda_ls;
    }

    pub fn label_smoothing_loss(p: &[f64], label: usize, lambda_ls: f64) -> f64 {
        let background = lambda_ls / p.len() as f64;
        let mut acc = 0.0;
        for (i, &q) in p.iter().enumerate() {
            let t = if i == label {
                1.0 - lambda_ls + background
            } else {
                background
            };
            acc += t * floored_ln(q);
        }
        -acc
    }

    pub fn label_smoothing_gradient_into(p: &[f64], label: usize, lambda_ls: f64, out: &mut [f64]) {
        smoothed_target_into(p.len(), label, lambda_ls, out);
        for (o, &q) in out.iter_mut().zip(p) {
            *o = q - *o;
        }
    }
}

pub fn softmax(logits: &LogitVector) -> ProbDistribution {
    let mut out = vec![0.0; logits.len()];
    raw::softmax_into(logits.as_slice(), &mut out);
    ProbDistribution(out)
}

/// Jacobian `∂p_i/∂z_j` of the softmax evaluated at its output `p`:
/// `p_i (1 - p_i)` on the diagonal and `-p_i p_j` elsewhere.
pub fn softmax_jacobian(p: &ProbDistribution) -> Array2<f64> {
    let p = p.as_slice();
    let c = p.len();
    Array2::from_shape_fn((c, c), |(i, j)| {
        if i == j {
            p[i] * (1.0 - p[i])
        } else {
            -p[i] * p[j]
        }
    })
}

/// `-ln max(p_y, LOG_FLOOR)`.
pub fn cross_entropy(p: &ProbDistribution, label: ClassLabel) -> Result<f64> {
    label.check(p.len())?;
    Ok(raw::cross_entropy(p.as_slice(), label.index()))
}

/// Shannon entropy in nats, within `[0, ln C]`.
pub fn entropy(p: &ProbDistribution) -> f64 {
    raw::entropy(p.as_slice())
}

/// Cross-entropy minus `lambda` times the prediction entropy.
pub fn regularized_loss(
    p: &ProbDistribution,
    label: ClassLabel,
    lambda: f64,
) -> Result<LossBreakdown> {
    check_lambda(lambda)?;
    let ce = cross_entropy(p, label)?;
    let h = entropy(p);
    Ok(LossBreakdown {
        ce,
        entropy: h,
        lambda,
        total: ce - lambda * h,
    })
}

/// The cell function `f(q) = q (1 + λ ln q − λ Σ_j p_j ln p_j)`.
///
/// The regularized gradient is `f(p_i)` off the label and `f(p_y) − 1` on it.
pub fn cell_function(q: f64, p: &ProbDistribution, lambda: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!(
            "cell argument must lie in (0, 1], got {q}"
        )));
    }
    check_lambda(lambda)?;
    Ok(raw::cell(q, entropy(p), lambda))
}

/// Gradient of [`regularized_loss`] composed with [`softmax`], taken with
/// respect to the logits.
pub fn regularized_gradient(
    p: &ProbDistribution,
    label: ClassLabel,
    lambda: f64,
) -> Result<GradientVector> {
    label.check(p.len())?;
    check_lambda(lambda)?;
    let mut out = vec![0.0; p.len()];
    raw::regularized_gradient_into(p.as_slice(), label.index(), lambda, &mut out);
    Ok(GradientVector(out))
}

/// Cross-entropy against the smoothed target `(1 − λ) onehot(y) + λ/C`.
pub fn label_smoothing_loss(
    p: &ProbDistribution,
    label: ClassLabel,
    lambda_ls: f64,
) -> Result<f64> {
    label.check(p.len())?;
    check_smoothing(lambda_ls)?;
    Ok(raw::label_smoothing_loss(
        p.as_slice(),
        label.index(),
        lambda_ls,
    ))
}

/// `p − t` for the smoothed target `t`.
pub fn label_smoothing_gradient(
    p: &ProbDistribution,
    label: ClassLabel,
    lambda_ls: f64,
) -> Result<GradientVector> {
    label.check(p.len())?;
    check_smoothing(lambda_ls)?;
    let mut out = vec![0.0; p.len()];
    raw::label_smoothing_gradient_into(p.as_slice(), label.index(), lambda_ls, &mut out);
    Ok(GradientVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(v: &[f64]) -> ProbDistribution {
        ProbDistribution::new(v.to_vec()).unwrap()
    }

    fn logits(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    /// Central differences of `loss(softmax(z))` over each logit.
    fn fd_gradient(z: &[f64], loss: impl Fn(&ProbDistribution) -> f64) -> Vec<f64> {
        let h = 1e-5;
        (0..z.len())
            .map(|i| {
                let mut up = z.to_vec();
                let mut down = z.to_vec();
                up[i] += h;
                down[i] -= h;
                let fu = loss(&softmax(&logits(&up)));
                let fd = loss(&softmax(&logits(&down)));
                (fu - fd) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / (na + nb).max(1e-12)
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&logits(&[0.0, 0.0, 0.0]));
        for &q in p.as_slice() {
            assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = softmax(&logits(&[2f64.ln(), 0.0, 0.0]));
        assert_abs_diff_eq!(p.as_slice()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.as_slice()[1], 0.25, epsilon = 1e-15);
        let big = softmax(&logits(&[1000.0, 1000.0, 999.0]));
        let small = softmax(&logits(&[1.0, 1.0, 0.0]));
        assert!(big.as_slice().iter().all(|q| q.is_finite()));
        for (a, b) in big.as_slice().iter().zip(small.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LogitVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(LogitVector::new(vec![1.0]).is_err());
        assert!(ProbDistribution::new(vec![0.6, 0.6]).is_err());
        assert!(ProbDistribution::new(vec![1.2, -0.2]).is_err());
        let p = dist(&[0.5, 0.5]);
        assert!(cross_entropy(&p, ClassLabel::new(2)).is_err());
        assert!(regularized_loss(&p, ClassLabel::new(0), -0.1).is_err());
        assert!(cell_function(0.0, &p, 1.0).is_err());
        assert!(cell_function(-0.5, &p, 1.0).is_err());
        assert!(label_smoothing_loss(&p, ClassLabel::new(0), 1.5).is_err());
        assert!(label_smoothing_loss(&p, ClassLabel::new(0), -0.01).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let j = softmax_jacobian(&dist(&[0.5, 0.5]));
        assert_eq!(j, ndarray::array![[0.25, -0.25], [-0.25, 0.25]]);
        let j = softmax_jacobian(&dist(&[1.0, 0.0]));
        assert!(j.iter().all(|&v| v == 0.0));

        // p = [0.5, 0.25, 0.25] comes from z = [ln 2, 0, 0].
        let z = [2f64.ln(), 0.0, 0.0];
        let p = softmax(&logits(&z));
        let j = softmax_jacobian(&p);
        let h = 1e-6;
        for col in 0..3 {
            let mut up = z;
            let mut down = z;
            up[col] += h;
            down[col] -= h;
            let pu = softmax(&logits(&up));
            let pd = softmax(&logits(&down));
            for row in 0..3 {
                let fd = (pu.as_slice()[row] - pd.as_slice()[row]) / (2.0 * h);
                let rel = (fd - j[[row, col]]).abs() / j[[row, col]].abs();
                assert!(rel < 1e-6, "({row},{col}) fd {fd} vs {}", j[[row, col]]);
            }
        }
        for row in j.rows() {
            assert!(row.sum().abs() < 1e-12);
        }
        assert_eq!(j, j.t());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(
            cross_entropy(&dist(&[1.0, 0.0]), ClassLabel::new(0)).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            cross_entropy(&dist(&[0.5, 0.5]), ClassLabel::new(1)).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // Saturated: floor keeps the loss finite.
        let ce = cross_entropy(&dist(&[1.0, 0.0]), ClassLabel::new(1)).unwrap();
        assert_abs_diff_eq!(ce, -(1e-12f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&dist(&[0.0, 1.0, 0.0])), 0.0);
        assert_abs_diff_eq!(entropy(&dist(&[0.25; 4])), 4f64.ln(), epsilon = 1e-15);
        // -(0.5 ln 0.5 + 2 · 0.25 ln 0.25) = 1.5 ln 2
        assert_abs_diff_eq!(
            entropy(&dist(&[0.5, 0.25, 0.25])),
            1.5 * 2f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(1.5 * 2f64.ln(), 1.039721, epsilon = 1e-6);
    }

    #[test]
    fn regularized_loss_examples() {
        let p = dist(&[0.7, 0.2, 0.1]);
        let y = ClassLabel::new(0);
        let off = regularized_loss(&p, y, 0.0).unwrap();
        assert_eq!(off.total, cross_entropy(&p, y).unwrap());

        let u = ProbDistribution::uniform(5).unwrap();
        let b = regularized_loss(&u, ClassLabel::new(3), 0.8).unwrap();
        assert_abs_diff_eq!(b.total, 5f64.ln() - 0.8 * 5f64.ln(), epsilon = 1e-14);

        let b = regularized_loss(&p, y, 0.5).unwrap();
        let ce = -(0.7f64).ln();
        let h = -(0.7 * 0.7f64.ln() + 0.2 * 0.2f64.ln() + 0.1 * 0.1f64.ln());
        assert_abs_diff_eq!(b.ce, ce, epsilon = 1e-15);
        assert_abs_diff_eq!(b.entropy, h, epsilon = 1e-15);
        assert_abs_diff_eq!(b.total, ce - 0.5 * h, epsilon = 1e-15);
    }

    #[test]
    fn cell_function_examples() {
        let p = dist(&[0.5, 0.25, 0.25]);
        for q in [0.01, 0.3, 1.0] {
            assert_eq!(cell_function(q, &p, 0.0).unwrap(), q);
        }
        for c in [2usize, 3, 7, 100] {
            let u = ProbDistribution::uniform(c).unwrap();
            for lambda in [0.0, 0.1, 1.0, 10.0] {
                let q = 1.0 / c as f64;
                assert_abs_diff_eq!(cell_function(q, &u, lambda).unwrap(), q, epsilon = 1e-12);
            }
        }
        let expected = 0.5 * (1.0 + 0.5f64.ln() + 1.5 * 2f64.ln());
        assert_abs_diff_eq!(
            cell_function(0.5, &p, 1.0).unwrap(),
            expected,
            epsilon = 1e-15
        );
    }

    #[test]
    fn regularized_gradient_examples() {
        let p = dist(&[0.7, 0.2, 0.1]);
        let g = regularized_gradient(&p, ClassLabel::new(0), 0.0).unwrap();
        assert_abs_diff_eq!(g.as_slice()[0], -0.3, epsilon = 1e-15);
        assert_eq!(&g.as_slice()[1..], &[0.2, 0.1]);

        let u = ProbDistribution::uniform(6).unwrap();
        let base = regularized_gradient(&u, ClassLabel::new(2), 0.0).unwrap();
        let reg = regularized_gradient(&u, ClassLabel::new(2), 2.5).unwrap();
        for (a, b) in base.as_slice().iter().zip(reg.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = softmax(&logits(&z));
        let y = ClassLabel::new(4);
        let g = regularized_gradient(&p, y, 0.3).unwrap();
        let fd = fd_gradient(&z, |q| regularized_loss(q, y, 0.3).unwrap().total);
        assert!(rel_err(g.as_slice(), &fd) < 1e-6);
    }

    #[test]
    fn label_smoothing_examples() {
        let p = dist(&[0.6, 0.3, 0.1]);
        let y = ClassLabel::new(1);
        assert_eq!(
            label_smoothing_loss(&p, y, 0.0).unwrap(),
            cross_entropy(&p, y).unwrap()
        );
        let u = ProbDistribution::uniform(200).unwrap();
        assert_abs_diff_eq!(
            label_smoothing_loss(&u, ClassLabel::new(7), 1.0).unwrap(),
            200f64.ln(),
            epsilon = 1e-12
        );

        // The smoothed target is the loss minimizer; its label mass is the CPP.
        let mut t = vec![0.0; 200];
        raw::smoothed_target_into(200, 0, 0.76, &mut t);
        assert_abs_diff_eq!(t[0], 0.2438, epsilon = 1e-12);
        let target = ProbDistribution::new(t).unwrap();
        let at_target = label_smoothing_loss(&target, ClassLabel::new(0), 0.76).unwrap();
        let mut shifted = target.clone().into_vec();
        shifted[0] += 0.001;
        shifted[1] -= 0.001;
        let shifted = ProbDistribution::new(shifted).unwrap();
        assert!(label_smoothing_loss(&shifted, ClassLabel::new(0), 0.76).unwrap() > at_target);
    }

    #[test]
    fn label_smoothing_gradient_examples() {
        let p = dist(&[0.7, 0.2, 0.1]);
        let y = ClassLabel::new(0);
        assert_eq!(
            label_smoothing_gradient(&p, y, 0.0).unwrap(),
            regularized_gradient(&p, y, 0.0).unwrap()
        );
        let u = ProbDistribution::uniform(8).unwrap();
        let g = label_smoothing_gradient(&u, ClassLabel::new(3), 1.0).unwrap();
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = softmax(&logits(&z));
        let y = ClassLabel::new(9);
        let g = label_smoothing_gradient(&p, y, 0.2).unwrap();
        let fd = fd_gradient(&z, |q| label_smoothing_loss(q, y, 0.2).unwrap());
        assert!(rel_err(g.as_slice(), &fd) < 1e-6);
    }

    #[test]
    fn lambda_zero_is_cross_entropy_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = rng.random_range(2..30);
            let z: Vec<f64> = (0..c).map(|_| rng.random_range(-8.0..8.0)).collect();
            let p = softmax(&logits(&z));
            let y = ClassLabel::new(rng.random_range(0..c));
            let b = regularized_loss(&p, y, 0.0).unwrap();
            assert_eq!(b.total.to_bits(), cross_entropy(&p, y).unwrap().to_bits());
            let g = regularized_gradient(&p, y, 0.0).unwrap();
            for (i, (&gi, &pi)) in g.as_slice().iter().zip(p.as_slice()).enumerate() {
                let ce_grad = if i == y.index() { pi - 1.0 } else { pi };
                assert_eq!(gi.to_bits(), ce_grad.to_bits());
            }
        }
    }

    #[test]
    fn ce_gradient_sign_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let c = rng.random_range(2..20);
            let z: Vec<f64> = (0..c).map(|_| rng.random_range(-4.0..4.0)).collect();
            let p = softmax(&logits(&z));
            let y = rng.random_range(0..c);
            let g = regularized_gradient(&p, ClassLabel::new(y), 0.0).unwrap();
            for (i, &gi) in g.as_slice().iter().enumerate() {
                assert!(if i == y { gi < 0.0 } else { gi > 0.0 });
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn logit_vec() -> impl Strategy<Value = Vec<f64>> {
            (2usize..40).prop_flat_map(|c| prop::collection::vec(-20.0f64..20.0, c))
        }

        proptest! {
            #[test]
            fn softmax_is_shift_invariant(z in logit_vec(), shift in -500.0f64..500.0) {
                let p = softmax(&logits(&z));
                let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
                let q = softmax(&logits(&shifted));
                for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                prop_assert!(ProbDistribution::new(q.into_vec()).is_ok());
            }

            #[test]
            fn entropy_is_bounded(z in logit_vec()) {
                let p = softmax(&logits(&z));
                let h = entropy(&p);
                prop_assert!(h >= 0.0);
                prop_assert!(h <= (p.len() as f64).ln() + 1e-9);
            }

            #[test]
            fn gradient_entries_sum_to_zero(z in logit_vec(), lambda in 0.0f64..3.0, pick in 0usize..1000) {
                let p = softmax(&logits(&z));
                let y = ClassLabel::new(pick % p.len());
                let g = regularized_gradient(&p, y, lambda).unwrap();
                let total: f64 = g.as_slice().iter().sum();
                prop_assert!(total.abs() < 1e-9);
            }

            #[test]
            fn breakdown_total_is_consistent(z in logit_vec(), lambda in 0.0f64..5.0, pick in 0usize..1000) {
                let p = softmax(&logits(&z));
                let y = ClassLabel::new(pick % p.len());
                let b = regularized_loss(&p, y, lambda).unwrap();
                let expected = b.ce - lambda * b.entropy;
                prop_assert!((b.total - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }
}
