//! Paired MER and label-smoothing runs whose λs target the same converged
//! true-class probability; compares the entropy each leaves behind.
//!
//!     cargo run --release --example compare_ls

use mer::classifier::{LossKind, TrainConfig};
use mer::harness::{compare_ls, RunSpec};

fn main() -> mer::Result<()> {
    let base = RunSpec::new(
        "synthetic:classes=10,per_class=60".parse()?,
        TrainConfig {
            loss: LossKind::Mer,
            hidden_dim: Some(40),
            epochs: 60,
            ..TrainConfig::default()
        },
    );
    let report = compare_ls(&base, &[0.41, 0.77], false, 2)?;
    for s in &report.summary {
        println!(
            "target {:.0}%: λ_MER {:.3}, λ_LS {:.2}; mean entropy MER {:.3} vs LS {:.3}; MER ≤ LS in {}/{}",
            100.0 * s.cpp,
            s.lambda_mer,
            s.lambda_ls,
            s.mean_mer_entropy,
            s.mean_ls_entropy,
            s.mer_entropy_le_ls_runs,
            s.runs
        );
    }
    Ok(())
}
