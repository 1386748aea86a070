//! A small multinomial classifier trained with hand-written backpropagation.
//!
//! [`ModelParams`] is either a single affine layer or affine → rectifier →
//! affine. Gradients at the logit layer come from [`crate::losses`]; the rest
//! is ordinary affine backprop. Training uses minibatch SGD with momentum,
//! coupled weight decay, plateau learning-rate decay and a λ schedule.

mod checkpoint;
mod model;
mod optim;
mod train;

pub use checkpoint::Checkpoint;
pub use model::{backward, batch_loss, Dense, LossKind, LossSpec, ModelParams};
pub use optim::{sgd_step, OptimizerState, SgdConfig};
pub use train::{
    argmax, evaluate, train, EpochMetrics, Evaluation, LambdaSchedule, TrainConfig, TrainError,
    TrainMetrics, TrainOutcome,
};
