//! Saves trained parameters to the text checkpoint format and reloads them.
//!
//!     cargo run --example checkpoint

use mer::classifier::{evaluate, train, Checkpoint, LossKind, TrainConfig};
use mer::data::{generate_synthetic, SyntheticSpec};

fn main() -> mer::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        class_count: 6,
        samples_per_class: 30,
        feature_dim: 8,
        ..SyntheticSpec::default()
    })?;
    let config = TrainConfig {
        loss: LossKind::Ls,
        lambda_schedule: "0:0.1".parse()?,
        hidden_dim: Some(12),
        epochs: 10,
        ..TrainConfig::default()
    };
    let out = train(&config, &ds, None)?;
    let ck = Checkpoint {
        params: out.params,
        seed: config.seed,
        epoch: config.epochs,
    };
    let path = std::env::temp_dir().join("mer_example.ckpt");
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!(
        "{}",
        ck.to_text().lines().take(7).collect::<Vec<_>>().join("\n")
    );
    println!("...\nreloaded identical: {}", back == ck);
    println!("accuracy {:.3}", evaluate(&back.params, &ds)?.accuracy);
    let _ = std::fs::remove_file(path);
    Ok(())
}
