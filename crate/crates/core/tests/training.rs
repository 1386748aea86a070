use mer::classifier::{train, LambdaSchedule, LossKind, TrainConfig};
use mer::data::{generate_synthetic, LabeledDataset, SyntheticSpec};
use mer::harness::{execute, DatasetSource, RunSpec};

fn separable() -> LabeledDataset {
    generate_synthetic(&SyntheticSpec {
        class_count: 5,
        samples_per_class: 20,
        feature_dim: 6,
        spacing: 4.0,
        noise: 0.2,
        seed: 11,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn config(loss: LossKind, lambda: f64) -> TrainConfig {
    TrainConfig {
        loss,
        lambda_schedule: LambdaSchedule::constant(lambda).unwrap(),
        hidden_dim: Some(16),
        epochs: 50,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_data_is_fit_within_fifty_epochs() {
    let ds = separable();
    for (loss, lambda) in [
        (LossKind::Ce, 0.0),
        (LossKind::Mer, 0.5),
        (LossKind::Ls, 0.2),
    ] {
        let out = train(&config(loss, lambda), &ds, None).unwrap();
        let hit = out.metrics.epochs.iter().find(|m| m.train_accuracy == 1.0);
        assert!(hit.is_some(), "{loss} never reached accuracy 1.0");
    }
}

#[test]
fn mer_keeps_more_entropy_than_ce() {
    let ds = separable();
    let ce = train(&config(LossKind::Ce, 0.0), &ds, None).unwrap();
    let mer = train(&config(LossKind::Mer, 0.5), &ds, None).unwrap();
    assert!(mer.metrics.last().train_entropy > ce.metrics.last().train_entropy);
    // Lower confidence on the label too.
    assert!(mer.metrics.last().train_ce > ce.metrics.last().train_ce);
}

#[test]
fn training_is_deterministic() {
    let ds = separable();
    let cfg = config(LossKind::Mer, 0.3);
    let a = train(&cfg, &ds, None).unwrap();
    let b = train(&cfg, &ds, None).unwrap();
    assert_eq!(a.metrics, b.metrics);
    let bits = |p: &mer::classifier::ModelParams| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.params), bits(&b.params));
    let c = train(&TrainConfig { seed: 4, ..cfg }, &ds, None).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn lambda_schedule_is_followed() {
    let ds = separable();
    let cfg = TrainConfig {
        lambda_schedule: "0:0.1,3:0.5".parse().unwrap(),
        epochs: 5,
        ..config(LossKind::Mer, 0.0)
    };
    let out = train(&cfg, &ds, None).unwrap();
    let lambdas: Vec<f64> = out.metrics.epochs.iter().map(|m| m.lambda).collect();
    assert_eq!(lambdas, vec![0.1, 0.1, 0.1, 0.1, 0.5, 0.5]);
}

#[test]
fn report_echo_replays_bit_for_bit() {
    let mut spec = RunSpec::new(
        "synthetic:classes=6,per_class=15,dim=5,seed=2"
            .parse::<DatasetSource>()
            .unwrap(),
        config(LossKind::Mer, 0.4),
    );
    spec.train.epochs = 8;
    spec.eval_fraction = Some(0.2);
    spec.corruption_rate = 0.1;
    let first = execute(&spec).unwrap().report;
    let echo = RunSpec::from_report_json(&first.to_json().unwrap()).unwrap();
    let second = execute(&echo).unwrap().report;
    let bits = |r: &mer::harness::RunReport| {
        r.metrics
            .epochs
            .iter()
            .flat_map(|m| {
                [
                    m.train_ce,
                    m.train_entropy,
                    m.train_objective,
                    m.train_accuracy,
                    m.eval_accuracy.unwrap(),
                ]
            })
            .map(f64::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&first), bits(&second));
    assert_eq!(first.summary, second.summary);
}
