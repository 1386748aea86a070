//! Held-out accuracy over label-corruption rates and MER strengths.
//!
//!     cargo run --release --example corruption_sweep

use mer::classifier::{LossKind, TrainConfig};
use mer::harness::{corrupt_sweep, RunSpec};

fn main() -> mer::Result<()> {
    let mut base = RunSpec::new(
        "synthetic:classes=10,per_class=60".parse()?,
        TrainConfig {
            loss: LossKind::Mer,
            hidden_dim: Some(40),
            epochs: 60,
            ..TrainConfig::default()
        },
    );
    base.eval_fraction = Some(0.2);
    let report = corrupt_sweep(&base, &[0.0, 0.2, 0.4], &[0.5, 1.0], 2)?;

    print!("{:>6}", "rate");
    for l in &report.lambdas {
        print!("{:>9}", format!("λ={l}"));
    }
    println!();
    for chunk in report.table.chunks(report.lambdas.len()) {
        print!("{:>6}", chunk[0].rate);
        for row in chunk {
            print!("{:>9.3}", row.mean_eval_accuracy);
        }
        println!();
    }
    for w in &report.wins {
        println!(
            "rate {}: best λ ≥ λ=0 in {}/{} runs",
            w.rate, w.best_lambda_wins, w.runs
        );
    }
    Ok(())
}
