use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use crate::error::{Error, Result};

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffers plus the current hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: ModelParams,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Ok(OptimizerState {
            velocity: params.zeros_like(),
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            weight_decay: config.weight_decay,
        })
    }
}

/// Heavy-ball SGD with weight decay folded into the gradient:
///
/// ```text
/// v ← μ v + g + wd · θ
/// θ ← θ − lr · v
/// ```
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(Error::Shape {
            expected: "gradients and momentum shaped like the parameters".into(),
            actual: "mismatched layer shapes".into(),
        });
    }
    if let Some((i, g)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        let bad = grads.iter().filter(|g| !g.is_finite()).count();
        return Err(Error::Numerical(format!(
            "non-finite gradient ({g}) at parameter {i}; {bad} of {} entries affected, lr {}",
            grads.param_count(),
            state.learning_rate
        )));
    }
    let (lr, mu, wd) = (state.learning_rate, state.momentum, state.weight_decay);
    for ((theta, v), &g) in params
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(grads.iter())
    {
        *v = mu * *v + g + wd * *theta;
        *theta -= lr * *v;
    }
    if !params.is_finite() {
        return Err(Error::Numerical(format!(
            "parameters became non-finite after a step with lr {lr}"
        )));
    }
    Ok(())
}
