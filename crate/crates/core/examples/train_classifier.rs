//! Trains the MLP with a λ schedule on synthetic data and prints the trace.
//!
//!     cargo run --release --example train_classifier

use mer::classifier::{evaluate, train, LossKind, TrainConfig};
use mer::convergence::cpp_for_lambda;
use mer::data::{generate_synthetic, split, SyntheticSpec};

fn main() -> mer::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec::default())?;
    let parts = split(&ds, 0.8, 0)?;
    let config = TrainConfig {
        loss: LossKind::Mer,
        lambda_schedule: "0:0.1,20:0.3".parse()?,
        hidden_dim: Some(64),
        epochs: 40,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&config, &parts.train, Some(&parts.eval))?;
    println!(
        "{:>5} {:>5} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "epoch", "λ", "lr", "CE", "H", "train", "eval"
    );
    for m in out.metrics.epochs.iter().step_by(5) {
        println!(
            "{:>5} {:>5} {:>9.1e} {:>8.4} {:>8.4} {:>8.3} {:>8.3}",
            m.epoch,
            m.lambda,
            m.learning_rate,
            m.train_ce,
            m.train_entropy,
            m.train_accuracy,
            m.eval_accuracy.unwrap_or(f64::NAN)
        );
    }
    let last = out.metrics.last();
    println!(
        "final e^-CE {:.4} vs closed form {:.4} at λ={}",
        out.metrics.experimental_cpp(),
        cpp_for_lambda(last.lambda, ds.class_count())?,
        last.lambda
    );
    println!(
        "eval accuracy {:.3}",
        evaluate(&out.params, &parts.eval)?.accuracy
    );
    Ok(())
}
