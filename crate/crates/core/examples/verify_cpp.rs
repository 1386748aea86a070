//! Trains at fixed λs until the learning rate bottoms out and compares the
//! converged e^{-CE} with the closed-form prediction.
//!
//!     cargo run --release --example verify_cpp

use mer::classifier::{LossKind, SgdConfig, TrainConfig};
use mer::data::SyntheticSpec;
use mer::harness::{verify_cpp, DatasetSource, RunSpec};

fn main() -> mer::Result<()> {
    let data = SyntheticSpec {
        class_count: 10,
        spacing: 3.0,
        ..SyntheticSpec::default()
    };
    let base = RunSpec::new(
        DatasetSource::Synthetic(data),
        TrainConfig {
            loss: LossKind::Mer,
            hidden_dim: Some(40),
            epochs: 400,
            plateau_patience: 10,
            stop_at_floor: true,
            sgd: SgdConfig {
                weight_decay: 2e-3,
                ..SgdConfig::default()
            },
            ..TrainConfig::default()
        },
    );
    let report = verify_cpp(&base, &[0.2, 0.5, 1.0], 1)?;
    println!(
        "{:>5} {:>12} {:>12} {:>8} {:>7}",
        "λ", "theoretical", "experimental", "gap pp", "epochs"
    );
    for r in &report.rows {
        println!(
            "{:>5} {:>12.4} {:>12.4} {:>8.2} {:>7}",
            r.lambda, r.theoretical_cpp, r.experimental_cpp, r.gap_pp, r.epochs_run
        );
    }
    println!(
        "at or below theory: {}, decreasing in λ: {}",
        report.experimental_at_or_below_theory, report.experimental_decreasing
    );
    Ok(())
}
