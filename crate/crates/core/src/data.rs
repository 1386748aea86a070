//! Labeled datasets: a synthetic fine-grained generator, label corruption,
//! CSV ingestion and stratified splitting.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { spec: SyntheticSpec },
    File { path: PathBuf },
    InMemory,
}

/// Feature rows with integer class labels and corruption bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    provenance: Provenance,
    corruption_mask: Vec<bool>,
    /// Labels before [`corrupt_labels`] touched them.
    original_labels: Option<Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        Self::with_provenance(features, labels, class_count, Provenance::InMemory)
    }

    pub fn with_provenance(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Validation(format!(
                "class count must be >= 2, got {class_count}"
            )));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", features.nrows()),
                actual: format!("{} labels", labels.len()),
            });
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Validation(format!(
                "label {l} at row {i} is out of range for {class_count} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "features contain non-finite values".into(),
            ));
        }
        let n = labels.len();
        Ok(LabeledDataset {
            features,
            labels,
            class_count,
            provenance,
            corruption_mask: vec![false; n],
            original_labels: None,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn corruption_mask(&self) -> &[bool] {
        &self.corruption_mask
    }

    pub fn corrupted_count(&self) -> usize {
        self.corruption_mask.iter().filter(|&&m| m).count()
    }

    /// Labels as they were before corruption; the current labels if none
    /// was applied.
    pub fn original_labels(&self) -> &[usize] {
        self.original_labels.as_deref().unwrap_or(&self.labels)
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Rows at `indices`, in that order, with their corruption state.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            provenance: self.provenance.clone(),
            corruption_mask: indices.iter().map(|&i| self.corruption_mask[i]).collect(),
            original_labels: self
                .original_labels
                .as_ref()
                .map(|orig| indices.iter().map(|&i| orig[i]).collect()),
        }
    }

    /// Same rows with the original labels restored.
    pub fn with_clean_labels(&self) -> LabeledDataset {
        let mut clean = self.clone();
        if let Some(orig) = clean.original_labels.take() {
            clean.labels = orig;
        }
        clean.corruption_mask.iter_mut().for_each(|m| *m = false);
        clean
    }
}

/// Parameters of the synthetic fine-grained generator.
///
/// Classes come in groups of `group_size`. Group anchors sit on a sphere of
/// radius `anchor_radius × spacing`; each class center sits at distance
/// `spacing` from its anchor in a random direction. Classes in the same
/// group are therefore close (about `spacing·√2` apart in high dimension)
/// and easy to confuse under noise of scale `noise`, while distinct groups
/// are well separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_count: usize,
    /// Samples for class 0; other classes follow `imbalance_ratio`.
    pub samples_per_class: usize,
    /// Geometric decay of class sizes: class `k` has `⌈n₀ r^k⌉` samples.
    /// `None` means balanced.
    pub imbalance_ratio: Option<f64>,
    pub feature_dim: usize,
    pub spacing: f64,
    pub noise: f64,
    pub group_size: usize,
    pub anchor_radius: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            class_count: 20,
            samples_per_class: 100,
            imbalance_ratio: None,
            feature_dim: 32,
            spacing: 2.4,
            noise: 1.0,
            group_size: 3,
            anchor_radius: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 classes"));
        }
        if self.samples_per_class == 0 || self.feature_dim == 0 || self.group_size == 0 {
            return Err(Error::invalid(
                "samples per class, feature dim and group size must be positive",
            ));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid(format!(
                "noise must be > 0, got {}",
                self.noise
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "spacing must be > 0, got {}",
                self.spacing
            )));
        }
        if !(self.anchor_radius >= 0.0 && self.anchor_radius.is_finite()) {
            return Err(Error::invalid("anchor radius must be finite and >= 0"));
        }
        if let Some(r) = self.imbalance_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!(
                    "imbalance ratio must lie in (0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }

    /// Number of samples generated for each class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let n0 = self.samples_per_class as f64;
        (0..self.class_count)
            .map(|k| match self.imbalance_ratio {
                None => self.samples_per_class,
                // The small slack keeps values like 100·0.9² = 81.000…01 at 81.
                Some(r) => ((n0 * r.powi(k as i32)) - 1e-9).ceil().max(1.0) as usize,
            })
            .collect()
    }

    /// Class centers, one per row. Deterministic in `seed`.
    pub fn centers(&self) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.feature_dim;
        let groups = self.class_count.div_ceil(self.group_size);
        let anchors: Vec<Array1<f64>> = (0..groups)
            .map(|_| random_unit(&mut rng, d) * (self.anchor_radius * self.spacing))
            .collect();
        let mut centers = Array2::zeros((self.class_count, d));
        for (k, mut row) in centers.rows_mut().into_iter().enumerate() {
            let offset = random_unit(&mut rng, d) * self.spacing;
            row.assign(&(&anchors[k / self.group_size] + &offset));
        }
        centers
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Draws `center + noise · N(0, I)` samples for every class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let centers = spec.centers();
    let sizes = spec.class_sizes();
    let total: usize = sizes.iter().sum();
    let d = spec.feature_dim;
    // Separate stream so noise does not shift when the center layout changes.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut features = Array2::zeros((total, d));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (k, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            for j in 0..d {
                let eps: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = centers[[k, j]] + spec.noise * eps;
            }
            labels.push(k);
            row += 1;
        }
    }
    LabeledDataset::with_provenance(
        features,
        labels,
        spec.class_count,
        Provenance::Synthetic { spec: spec.clone() },
    )
}

fn nearest_row(centers: &Array2<f64>, x: ArrayView1<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.rows().into_iter().enumerate() {
        let dist: f64 = c.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        if dist < best.1 {
            best = (k, dist);
        }
    }
    best.0
}

/// Accuracy of assigning every row to its nearest center (ties to the
/// lowest class index). With the generator's true centers this is a proxy
/// for the Bayes accuracy of a balanced synthetic set.
pub fn nearest_center_accuracy(ds: &LabeledDataset, centers: &Array2<f64>) -> Result<f64> {
    if centers.nrows() != ds.class_count() || centers.ncols() != ds.feature_dim() {
        return Err(Error::Shape {
            expected: format!("{}x{}", ds.class_count(), ds.feature_dim()),
            actual: format!("{}x{}", centers.nrows(), centers.ncols()),
        });
    }
    if ds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let hits = ds
        .features()
        .rows()
        .into_iter()
        .zip(ds.labels())
        .filter(|(x, &y)| nearest_row(centers, *x) == y)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Per-class feature means; rows for empty classes are zero.
pub fn class_means(ds: &LabeledDataset) -> Array2<f64> {
    let mut sums = Array2::zeros((ds.class_count(), ds.feature_dim()));
    let mut counts = vec![0usize; ds.class_count()];
    for (x, &y) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut row = sums.row_mut(y);
        row += &x;
        counts[y] += 1;
    }
    for (mut row, &n) in sums.rows_mut().into_iter().zip(&counts) {
        if n > 0 {
            row /= n as f64;
        }
    }
    sums
}

/// Replaces exactly `⌊rate · N⌋` labels, chosen without replacement, with a
/// label drawn uniformly from the other `C − 1` classes.
pub fn corrupt_labels(ds: &LabeledDataset, rate: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "corruption rate must lie in [0, 1], got {rate}"
        )));
    }
    if ds.original_labels.is_some() {
        return Err(Error::Validation(
            "dataset labels are already corrupted".into(),
        ));
    }
    let n = ds.len();
    let count = (rate * n as f64 + 1e-9).floor() as usize;
    let count = count.min(n);
    let mut out = ds.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, count);
    let original = ds.labels.clone();
    let c = ds.class_count;
    for i in chosen.iter() {
        let draw = rng.random_range(0..c - 1);
        out.labels[i] = if draw >= original[i] { draw + 1 } else { draw };
        out.corruption_mask[i] = true;
    }
    out.original_labels = Some(original);
    Ok(out)
}

/// Where the label lives in a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LabelColumn {
    First,
    #[default]
    Last,
    Index(usize),
}

/// CSV layout options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: LabelColumn,
    pub delimiter: u8,
    pub has_header: bool,
    /// Number of classes; inferred as `max label + 1` when absent.
    pub class_count: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label_column: LabelColumn::Last,
            delimiter: b',',
            has_header: false,
            class_count: None,
        }
    }
}

fn label_index(col: LabelColumn, width: usize) -> Option<usize> {
    match col {
        LabelColumn::First => Some(0),
        LabelColumn::Last => width.checked_sub(1),
        LabelColumn::Index(i) if i < width => Some(i),
        LabelColumn::Index(_) => None,
    }
}

fn parse_label(field: &str) -> Option<usize> {
    let field = field.trim();
    if let Ok(v) = field.parse::<usize>() {
        return Some(v);
    }
    let v: f64 = field.parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64).then_some(v as usize)
}

/// Reads a rectangular numeric table. Every column other than the label
/// column becomes a feature.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut width = None;
    let mut label_col = 0;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => {
                if record.len() < 2 {
                    return Err(Error::Parse {
                        line,
                        message: "need at least one feature column and a label column".into(),
                    });
                }
                label_col =
                    label_index(schema.label_column, record.len()).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("label column out of range for {} columns", record.len()),
                    })?;
                width = Some(record.len());
            }
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                });
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_col {
                let label = parse_label(field).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("label {field:?} is not a non-negative integer"),
                })?;
                labels.push(label);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("field {j} ({field:?}) is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("field {j} is not finite"),
                    });
                }
                values.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            line: 1,
            message: "file contains no data rows".into(),
        });
    };
    let max_label = labels.iter().copied().max().unwrap_or(0);
    let class_count = match schema.class_count {
        Some(c) => {
            if max_label >= c {
                return Err(Error::Validation(format!(
                    "label {max_label} is out of range for {c} classes"
                )));
            }
            c
        }
        None => (max_label + 1).max(2),
    };
    let features = Array2::from_shape_vec((labels.len(), width - 1), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    LabeledDataset::with_provenance(
        features,
        labels,
        class_count,
        Provenance::File {
            path: path.to_path_buf(),
        },
    )
}

/// Writes `ds` with the layout described by `schema`. Values use the
/// shortest decimal form that parses back to the same `f64`.
pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let path = path.as_ref();
    let width = ds.feature_dim() + 1;
    let label_col = label_index(schema.label_column, width)
        .ok_or_else(|| Error::invalid("label column out of range"))?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let write_err = |e: csv::Error| Error::io(path, e.into());
    if schema.has_header {
        let mut header = Vec::with_capacity(width);
        let mut f = 0;
        for j in 0..width {
            if j == label_col {
                header.push("label".to_string());
            } else {
                header.push(format!("x{f}"));
                f += 1;
            }
        }
        writer.write_record(&header).map_err(write_err)?;
    }
    let mut fields = Vec::with_capacity(width);
    for (x, &y) in ds.features().rows().into_iter().zip(ds.labels()) {
        fields.clear();
        let mut feats = x.iter();
        for j in 0..width {
            if j == label_col {
                fields.push(y.to_string());
            } else {
                fields.push(format!("{:?}", feats.next().copied().unwrap_or_default()));
            }
        }
        writer.write_record(&fields).map_err(write_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Result of [`split`]: the two parts and the parent row indices of each.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledDataset,
    pub eval: LabeledDataset,
    pub train_indices: Vec<usize>,
    pub eval_indices: Vec<usize>,
    /// False when some class had fewer than two samples and the split fell
    /// back to a plain shuffle.
    pub stratified: bool,
}

/// Disjoint, exhaustive train/eval split, stratified by class when every
/// class has at least two samples.
pub fn split(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if ds.len() < 2 {
        return Err(Error::invalid("need at least 2 rows to split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = ds.class_sizes();
    let stratified = sizes.iter().all(|&n| n == 0 || n >= 2);
    let take = |n: usize| ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);

    let mut train_indices = Vec::new();
    let mut eval_indices = Vec::new();
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count()];
        for (i, &y) in ds.labels().iter().enumerate() {
            by_class[y].push(i);
        }
        for mut members in by_class.into_iter().filter(|m| !m.is_empty()) {
            members.shuffle(&mut rng);
            let k = take(members.len());
            train_indices.extend_from_slice(&members[..k]);
            eval_indices.extend_from_slice(&members[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..ds.len()).collect();
        all.shuffle(&mut rng);
        let k = take(all.len());
        train_indices.extend_from_slice(&all[..k]);
        eval_indices.extend_from_slice(&all[k..]);
    }
    train_indices.sort_unstable();
    eval_indices.sort_unstable();
    Ok(Split {
        train: ds.subset(&train_indices),
        eval: ds.subset(&eval_indices),
        train_indices,
        eval_indices,
        stratified,
    })
}
