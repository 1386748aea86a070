//! Generates confusable synthetic classes, measures the nearest-center
//! ceiling, corrupts labels, splits, and round-trips through CSV.
//!
//!     cargo run --example synthetic_data

use mer::data::{
    corrupt_labels, generate_synthetic, load_csv, nearest_center_accuracy, save_csv, split,
    CsvSchema, SyntheticSpec,
};

fn main() -> mer::Result<()> {
    let spec = SyntheticSpec {
        imbalance_ratio: Some(0.95),
        seed: 3,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec)?;
    println!(
        "{} samples, {} features, {} classes",
        ds.len(),
        ds.feature_dim(),
        ds.class_count()
    );
    println!("class sizes: {:?}", ds.class_sizes());
    println!(
        "nearest-center ceiling: {:.3}",
        nearest_center_accuracy(&ds, &spec.centers())?
    );

    let parts = split(&ds, 0.8, 1)?;
    let noisy = corrupt_labels(&parts.train, 0.2, 1)?;
    println!(
        "train {} (corrupted {}), eval {}, stratified: {}",
        noisy.len(),
        noisy.corrupted_count(),
        parts.eval.len(),
        parts.stratified
    );

    let path = std::env::temp_dir().join("mer_synthetic_example.csv");
    save_csv(&ds, &path, &CsvSchema::default())?;
    let back = load_csv(&path, &CsvSchema::default())?;
    println!(
        "CSV round trip identical: {}",
        back.features() == ds.features() && back.labels() == ds.labels()
    );
    let _ = std::fs::remove_file(path);
    Ok(())
}
