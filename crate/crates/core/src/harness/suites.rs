//! Multi-run experiment suites. Runs are independent and execute on the
//! rayon pool; every run is seeded on its own, so results do not depend on
//! scheduling.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{execute, Run, RunSpec, RunStatus, VERSION};
use crate::classifier::{LambdaSchedule, LossKind};
use crate::convergence::{lambda_for_cpp, ls_lambda_for_cpp};
use crate::data::{
    generate_synthetic, nearest_center_accuracy, save_csv, CsvSchema, SyntheticSpec,
};
use crate::error::{Error, Result};

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        return Err(Error::Usage("at least one run is required".into()));
    }
    Ok(())
}

fn with_loss(spec: &RunSpec, loss: LossKind, lambda: f64) -> Result<RunSpec> {
    let mut out = spec.clone();
    out.train.loss = loss;
    out.train.lambda_schedule = LambdaSchedule::constant(lambda)?;
    Ok(out)
}

fn run_all(specs: Vec<RunSpec>) -> Result<Vec<Run>> {
    specs.into_par_iter().map(|s| execute(&s)).collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// One fixed-λ run of [`verify_cpp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub lambda: f64,
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub theoretical_cpp: f64,
    pub experimental_cpp: f64,
    /// `experimental − theoretical`, in percentage points.
    pub gap_pp: f64,
    pub final_ce: f64,
    pub training_entropy: f64,
    pub train_accuracy: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: String,
    pub config: RunSpec,
    pub lambdas: Vec<f64>,
    pub runs: usize,
    pub rows: Vec<VerifyRow>,
    /// Every completed run ended at or below its theoretical value.
    pub experimental_at_or_below_theory: bool,
    /// Mean experimental value strictly decreases as λ increases.
    pub experimental_decreasing: bool,
    pub failures: usize,
    pub wall_clock_seconds: f64,
}

/// Trains an MER model at each fixed λ (`runs` seeds each) and sets the
/// converged `e^{-CE}` beside the closed-form prediction.
pub fn verify_cpp(base: &RunSpec, lambdas: &[f64], runs: usize) -> Result<VerifyReport> {
    check_runs(runs)?;
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Usage("verify-cpp needs one or more λ > 0".into()));
    }
    let started = Instant::now();
    let mut specs = Vec::new();
    for &lambda in lambdas {
        for r in 0..runs {
            specs.push(with_loss(&base.for_run(r), LossKind::Mer, lambda)?);
        }
    }
    let results = run_all(specs)?;
    let rows: Vec<VerifyRow> = results
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let s = &run.report.summary;
            VerifyRow {
                lambda: lambdas[i / runs],
                run: i % runs,
                seed: run.report.seed,
                status: run.report.status,
                theoretical_cpp: s.theoretical_cpp,
                experimental_cpp: s.experimental_cpp,
                gap_pp: 100.0 * (s.experimental_cpp - s.theoretical_cpp),
                final_ce: s.final_ce,
                training_entropy: s.training_entropy,
                train_accuracy: s.train_accuracy,
                epochs_run: s.epochs_run,
            }
        })
        .collect();

    let completed = |r: &&VerifyRow| r.status == RunStatus::Completed;
    let mut by_lambda: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&l| {
            let m = mean(
                rows.iter()
                    .filter(completed)
                    .filter(|r| r.lambda == l)
                    .map(|r| r.experimental_cpp),
            );
            (l, m)
        })
        .collect();
    by_lambda.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(VerifyReport {
        version: VERSION.to_string(),
        config: base.clone(),
        lambdas: lambdas.to_vec(),
        runs,
        experimental_at_or_below_theory: rows
            .iter()
            .filter(completed)
            .all(|r| r.experimental_cpp <= r.theoretical_cpp),
        experimental_decreasing: by_lambda.windows(2).all(|w| w[1].1 < w[0].1),
        failures: rows
            .iter()
            .filter(|r| r.status != RunStatus::Completed)
            .count(),
        rows,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// One side of a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSide {
    pub loss: LossKind,
    pub lambda: f64,
    pub status: RunStatus,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub training_entropy: f64,
    pub final_ce: f64,
    pub experimental_cpp: f64,
}

impl CompareSide {
    fn from_run(run: &Run, loss: LossKind, lambda: f64) -> Self {
        let s = &run.report.summary;
        CompareSide {
            loss,
            lambda,
            status: run.report.status,
            train_accuracy: s.train_accuracy,
            eval_accuracy: s.eval_accuracy,
            training_entropy: s.training_entropy,
            final_ce: s.final_ce,
            experimental_cpp: s.experimental_cpp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub cpp: f64,
    pub run: usize,
    pub seed: u64,
    pub mer: CompareSide,
    pub ls: CompareSide,
    pub mer_entropy_le_ls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub cpp: f64,
    pub lambda_mer: f64,
    pub lambda_ls: f64,
    pub runs: usize,
    /// Runs in which MER ended with no more entropy than LS.
    pub mer_entropy_le_ls_runs: usize,
    pub mean_mer_entropy: f64,
    pub mean_ls_entropy: f64,
    pub mean_mer_accuracy: f64,
    pub mean_ls_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareLsReport {
    pub version: String,
    pub config: RunSpec,
    pub class_count: usize,
    /// λ_LS from the exact inverse of `1 − λ + λ/C` rather than `1 − cpp`.
    pub exact_ls: bool,
    pub runs: usize,
    pub rows: Vec<CompareRow>,
    pub summary: Vec<CompareSummary>,
    pub failures: usize,
    pub wall_clock_seconds: f64,
}

/// Paired MER and label-smoothing runs whose λs target the same converged
/// true-class probability.
pub fn compare_ls(
    base: &RunSpec,
    cpps: &[f64],
    exact_ls: bool,
    runs: usize,
) -> Result<CompareLsReport> {
    check_runs(runs)?;
    if cpps.is_empty() {
        return Err(Error::Usage(
            "compare-ls needs at least one target probability".into(),
        ));
    }
    let started = Instant::now();
    let class_count = base.dataset.load()?.class_count();
    let usage = |e: Error| Error::Usage(e.to_string());
    let mut lambdas = Vec::with_capacity(cpps.len());
    for &cpp in cpps {
        let mer = lambda_for_cpp(cpp, class_count).map_err(usage)?;
        let ls = ls_lambda_for_cpp(cpp, class_count, exact_ls).map_err(usage)?;
        lambdas.push((mer, ls));
    }
    let mut specs = Vec::new();
    for &(mer, ls) in &lambdas {
        for r in 0..runs {
            let spec = base.for_run(r);
            specs.push(with_loss(&spec, LossKind::Mer, mer)?);
            specs.push(with_loss(&spec, LossKind::Ls, ls)?);
        }
    }
    let results = run_all(specs)?;
    let rows: Vec<CompareRow> = results
        .chunks(2)
        .enumerate()
        .map(|(i, pair)| {
            let (lm, ll) = lambdas[i / runs];
            let mer = CompareSide::from_run(&pair[0], LossKind::Mer, lm);
            let ls = CompareSide::from_run(&pair[1], LossKind::Ls, ll);
            CompareRow {
                cpp: cpps[i / runs],
                run: i % runs,
                seed: pair[0].report.seed,
                mer_entropy_le_ls: mer.training_entropy <= ls.training_entropy,
                mer,
                ls,
            }
        })
        .collect();
    let summary = cpps
        .iter()
        .zip(&lambdas)
        .enumerate()
        .map(|(k, (&cpp, &(lm, ll)))| {
            let group = &rows[k * runs..(k + 1) * runs];
            CompareSummary {
                cpp,
                lambda_mer: lm,
                lambda_ls: ll,
                runs,
                mer_entropy_le_ls_runs: group.iter().filter(|r| r.mer_entropy_le_ls).count(),
                mean_mer_entropy: mean(group.iter().map(|r| r.mer.training_entropy)),
                mean_ls_entropy: mean(group.iter().map(|r| r.ls.training_entropy)),
                mean_mer_accuracy: mean(
                    group
                        .iter()
                        .map(|r| r.mer.eval_accuracy.unwrap_or(r.mer.train_accuracy)),
                ),
                mean_ls_accuracy: mean(
                    group
                        .iter()
                        .map(|r| r.ls.eval_accuracy.unwrap_or(r.ls.train_accuracy)),
                ),
            }
        })
        .collect();
    let failures = rows
        .iter()
        .flat_map(|r| [r.mer.status, r.ls.status])
        .filter(|s| *s != RunStatus::Completed)
        .count();
    Ok(CompareLsReport {
        version: VERSION.to_string(),
        config: base.clone(),
        class_count,
        exact_ls,
        runs,
        rows,
        summary,
        failures,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub rate: f64,
    pub lambda: f64,
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub eval_accuracy: f64,
    pub train_accuracy: f64,
    pub corrupted_labels: usize,
}

/// Mean held-out accuracy of one (rate, λ) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTableRow {
    pub rate: f64,
    pub lambda: f64,
    pub runs: usize,
    pub mean_eval_accuracy: f64,
}

/// How often the best positive λ matched or beat λ = 0 at one rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepWins {
    pub rate: f64,
    pub runs: usize,
    pub best_lambda_wins: usize,
    /// Best positive λ of each run.
    pub best_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub config: RunSpec,
    pub rates: Vec<f64>,
    /// Always starts with 0, the unregularized baseline.
    pub lambdas: Vec<f64>,
    pub runs: usize,
    pub cells: Vec<SweepCell>,
    pub table: Vec<SweepTableRow>,
    pub wins: Vec<SweepWins>,
    pub failures: usize,
    pub wall_clock_seconds: f64,
}

/// Full factorial of corruption rates × MER λs × seeds, scored on clean
/// held-out labels. Requires `base.eval_fraction`.
pub fn corrupt_sweep(
    base: &RunSpec,
    rates: &[f64],
    lambdas: &[f64],
    runs: usize,
) -> Result<SweepReport> {
    check_runs(runs)?;
    if base.eval_fraction.is_none() {
        return Err(Error::Usage(
            "corrupt-sweep needs a held-out fraction".into(),
        ));
    }
    if rates.is_empty() || rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Usage("corruption rates must lie in [0, 1]".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::Usage("sweep λs must be finite and >= 0".into()));
    }
    let started = Instant::now();
    let mut grid = vec![0.0];
    for &l in lambdas {
        if !grid.contains(&l) {
            grid.push(l);
        }
    }

    let mut specs = Vec::new();
    for &rate in rates {
        for &lambda in &grid {
            for r in 0..runs {
                let mut spec = with_loss(&base.for_run(r), LossKind::Mer, lambda)?;
                spec.corruption_rate = rate;
                specs.push(spec);
            }
        }
    }
    let results = run_all(specs)?;
    let per_rate = grid.len() * runs;
    let cells: Vec<SweepCell> = results
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let s = &run.report.summary;
            SweepCell {
                rate: rates[i / per_rate],
                lambda: grid[(i % per_rate) / runs],
                run: i % runs,
                seed: run.report.seed,
                status: run.report.status,
                eval_accuracy: s.eval_accuracy.unwrap_or(f64::NAN),
                train_accuracy: s.train_accuracy,
                corrupted_labels: run.report.data.corrupted_labels,
            }
        })
        .collect();

    let mut table = Vec::new();
    let mut wins = Vec::new();
    for (ri, &rate) in rates.iter().enumerate() {
        let block = &cells[ri * per_rate..(ri + 1) * per_rate];
        for (li, &lambda) in grid.iter().enumerate() {
            let group = &block[li * runs..(li + 1) * runs];
            table.push(SweepTableRow {
                rate,
                lambda,
                runs,
                mean_eval_accuracy: mean(group.iter().map(|c| c.eval_accuracy)),
            });
        }
        if grid.len() > 1 {
            let mut count = 0;
            let mut best_lambdas = Vec::with_capacity(runs);
            for r in 0..runs {
                let baseline = block[r].eval_accuracy;
                let best = block[runs..]
                    .iter()
                    .filter(|c| c.run == r)
                    .max_by(|a, b| a.eval_accuracy.total_cmp(&b.eval_accuracy))
                    .expect("grid has a positive λ");
                if best.eval_accuracy >= baseline {
                    count += 1;
                }
                best_lambdas.push(best.lambda);
            }
            wins.push(SweepWins {
                rate,
                runs,
                best_lambda_wins: count,
                best_lambdas,
            });
        }
    }
    Ok(SweepReport {
        version: VERSION.to_string(),
        config: base.clone(),
        rates: rates.to_vec(),
        lambdas: grid,
        runs,
        failures: cells
            .iter()
            .filter(|c| c.status != RunStatus::Completed)
            .count(),
        cells,
        table,
        wins,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataReport {
    pub version: String,
    pub spec: SyntheticSpec,
    pub path: PathBuf,
    pub samples: usize,
    pub feature_dim: usize,
    pub class_sizes: Vec<usize>,
    /// Accuracy of assigning each sample to the nearest true class center.
    pub ceiling_accuracy: f64,
}

/// Generates a synthetic dataset, writes it as CSV (label last, no header)
/// and reports its nearest-center ceiling.
pub fn gen_data(spec: &SyntheticSpec, out: &Path) -> Result<GenDataReport> {
    let ds = generate_synthetic(spec)?;
    save_csv(&ds, out, &CsvSchema::default())?;
    Ok(GenDataReport {
        version: VERSION.to_string(),
        spec: spec.clone(),
        path: out.to_path_buf(),
        samples: ds.len(),
        feature_dim: ds.feature_dim(),
        class_sizes: ds.class_sizes(),
        ceiling_accuracy: nearest_center_accuracy(&ds, &spec.centers())?,
    })
}
