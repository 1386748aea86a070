//! Maximum entropy regularization for softmax classifiers.
//!
//! - [`losses`]: softmax, cross-entropy, entropy, the regularized loss and
//!   its analytic gradient, and label smoothing.
//! - [`convergence`]: the closed-form relation between λ and the converged
//!   true-class probability, its inverse, and a numerical simplex oracle.
//! - [`classifier`]: a small MLP trained by minibatch SGD.
//! - [`data`]: synthetic confusable-class data, label corruption, CSV I/O.
//! - [`harness`]: reproducible runs with JSON reports and multi-seed suites.
//! - [`cli`]: the `mer` command-line front end.

pub mod classifier;
pub mod cli;
pub mod convergence;
pub mod data;
pub mod error;
pub mod harness;
pub mod losses;

pub use error::{Error, Result};
