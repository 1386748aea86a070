//! Runs one experiment through the harness, prints its JSON report, and
//! replays the embedded config echo to show the metrics reproduce exactly.
//!
//!     cargo run --release --example run_report

use mer::classifier::{LossKind, TrainConfig};
use mer::harness::{execute, RunSpec};

fn main() -> mer::Result<()> {
    let mut spec = RunSpec::new(
        "synthetic:classes=8,per_class=40,dim=10,seed=4".parse()?,
        TrainConfig {
            loss: LossKind::Mer,
            lambda_schedule: "0:0.3".parse()?,
            hidden_dim: Some(16),
            epochs: 5,
            ..TrainConfig::default()
        },
    );
    spec.eval_fraction = Some(0.25);
    spec.corruption_rate = 0.1;

    let report = execute(&spec)?.report;
    let json = report.to_json()?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "summary": report.summary,
            "data": report.data,
        }))?
    );

    let replay = execute(&RunSpec::from_report_json(&json)?)?.report;
    println!(
        "replayed metrics identical: {}",
        replay.metrics == report.metrics
    );
    report.write_trace(std::io::stdout())?;
    Ok(())
}
