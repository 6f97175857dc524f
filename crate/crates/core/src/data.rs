//! Tabular dataset ingestion, standardization, splitting, and the
//! group-balanced minibatch sampler.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_for_step, rng_from_seed};

/// Minibatch carrying features, binary labels, and protected-group ids.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedBatch {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub groups: Vec<usize>,
}

impl GroupedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// In-memory dataset. Group ids are contiguous in `[0, group_count)` and the
/// protected attribute is not part of `features`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub groups: Vec<usize>,
    pub group_count: usize,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.labels.len() || self.labels.len() != self.groups.len() {
            return Err(Error::dim(
                "dataset rows",
                self.features.rows(),
                self.labels.len().min(self.groups.len()),
            ));
        }
        let mut seen = vec![false; self.group_count];
        for &g in &self.groups {
            if g >= self.group_count {
                return Err(Error::GroupOutOfRange {
                    group: g,
                    group_count: self.group_count,
                });
            }
            seen[g] = true;
        }
        if let Some(g) = seen.iter().position(|&s| !s) {
            return Err(Error::EmptyGroup { group: g });
        }
        if self.labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Row indices of each group.
    pub fn group_rows(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.group_count];
        for (i, &g) in self.groups.iter().enumerate() {
            rows[g].push(i);
        }
        rows
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            group_count: self.group_count,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Fraction of rows with label 1, per group and overall.
    pub fn label_positive_rates(&self) -> (f64, Vec<f64>) {
        let mut per_group = vec![0.0; self.group_count];
        let mut counts = vec![0usize; self.group_count];
        let mut overall = 0.0;
        for (&y, &g) in self.labels.iter().zip(&self.groups) {
            per_group[g] += y;
            counts[g] += 1;
            overall += y;
        }
        for (r, &n) in per_group.iter_mut().zip(&counts) {
            *r /= n.max(1) as f64;
        }
        (overall / self.len().max(1) as f64, per_group)
    }
}

fn csv_error(path: &Path, message: impl Into<String>) -> Error {
    Error::CsvFormat {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Loads a dataset from a headered CSV file. The group column (arbitrary
/// strings or integers) is mapped to contiguous ids in first-appearance order
/// and removed from the features; the label column must contain 0 or 1.
pub fn load_csv(path: &Path, label_column: &str, group_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, e.to_string()))?
        .clone();

    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| csv_error(path, format!("missing label column '{label_column}'")))?;
    let group_idx = headers
        .iter()
        .position(|h| h == group_column)
        .ok_or_else(|| csv_error(path, format!("missing group column '{group_column}'")))?;
    if label_idx == group_idx {
        return Err(csv_error(path, "label and group columns must differ"));
    }

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx && i != group_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut group_ids: HashMap<String, usize> = HashMap::new();
    let mut group_order: Vec<String> = Vec::new();

    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e.to_string()))?;
        let line_no = line + 2; // header is line 1
        let mut features = Vec::with_capacity(feature_names.len());
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                let y: f64 = field.trim().parse().map_err(|_| {
                    csv_error(path, format!("line {line_no}: non-numeric label '{field}'"))
                })?;
                if y != 0.0 && y != 1.0 {
                    return Err(csv_error(
                        path,
                        format!("line {line_no}: label must be 0 or 1, got '{field}'"),
                    ));
                }
                labels.push(y);
            } else if i == group_idx {
                let key = field.trim().to_string();
                let next = group_ids.len();
                let id = *group_ids.entry(key.clone()).or_insert_with(|| {
                    group_order.push(key);
                    next
                });
                groups.push(id);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| {
                    csv_error(
                        path,
                        format!("line {line_no}: non-numeric feature '{field}'"),
                    )
                })?;
                features.push(v);
            }
        }
        if features.len() != feature_names.len() {
            return Err(csv_error(
                path,
                format!("line {line_no}: expected {} fields", headers.len()),
            ));
        }
        rows.push(features);
    }

    let ds = Dataset {
        features: Matrix::from_rows(&rows)?,
        labels,
        groups,
        group_count: group_ids.len(),
        feature_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset as CSV: feature columns, then the label and group columns
/// under the given names. Group ids are written as integers.
pub fn write_csv(
    ds: &Dataset,
    path: &Path,
    label_column: &str,
    group_column: &str,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e.to_string()))?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push(label_column.to_string());
    header.push(group_column.to_string());
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e.to_string()))?;
    for r in 0..ds.len() {
        let mut record: Vec<String> = ds.features.row(r).iter().map(|v| v.to_string()).collect();
        record.push((ds.labels[r] as i64).to_string());
        record.push(ds.groups[r].to_string());
        writer
            .write_record(&record)
            .map_err(|e| csv_error(path, e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-column standardization parameters fitted on a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Population mean and standard deviation per column. Zero-variance columns
/// get std 1 so they scale to (numerically) all zeros.
pub fn fit_scaler(train: &Dataset) -> ScalerParams {
    let n = train.len().max(1) as f64;
    let d = train.features.cols();
    let mut means = vec![0.0; d];
    for r in 0..train.len() {
        for (m, &v) in means.iter_mut().zip(train.features.row(r)) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut stds = vec![0.0; d];
    for r in 0..train.len() {
        for ((s, &m), &v) in stds.iter_mut().zip(&means).zip(train.features.row(r)) {
            let dv = v - m;
            *s += dv * dv;
        }
    }
    for (s, &m) in stds.iter_mut().zip(&means) {
        *s = (*s / n).sqrt();
        if *s <= 1e-12 * (1.0 + m.abs()) {
            *s = 1.0;
        }
    }
    ScalerParams { means, stds }
}

/// Applies `(v - mean) / std` column-wise.
pub fn apply_scaler(scaler: &ScalerParams, ds: &Dataset) -> Result<Dataset> {
    if scaler.means.len() != ds.features.cols() {
        return Err(Error::dim(
            "scaler columns",
            ds.features.cols(),
            scaler.means.len(),
        ));
    }
    let mut out = ds.clone();
    for r in 0..out.len() {
        let row = out.features.row_mut(r);
        for ((v, &m), &s) in row.iter_mut().zip(&scaler.means).zip(&scaler.stds) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

/// Random split into train (`floor(N * (1 - test_fraction))` rows) and test
/// (the remainder). Deterministic per seed. Redraws (up to 100 attempts) if
/// either side loses a group entirely.
pub fn split_train_test(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = ds.len();
    let n_train = ((n as f64) * (1.0 - test_fraction)).floor() as usize;

    for attempt in 0..100u64 {
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = rng_from_seed(derive_seed(seed, attempt));
        // Fisher-Yates, driven by our seeded stream.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let (mut train_idx, mut test_idx) = {
            let (a, b) = indices.split_at(n_train);
            (a.to_vec(), b.to_vec())
        };
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        let train = ds.select(&train_idx);
        let test = ds.select(&test_idx);
        let covered = |part: &Dataset| {
            let mut seen = vec![false; ds.group_count];
            for &g in &part.groups {
                seen[g] = true;
            }
            seen.into_iter().all(|s| s)
        };
        if covered(&train) && covered(&test) {
            return Ok((train, test));
        }
    }
    Err(Error::Config(
        "could not split without losing a group in 100 attempts".into(),
    ))
}

/// Balanced minibatch: exactly `per_group` rows from every group, drawn with
/// replacement within each group. Deterministic per `(seed, step)`.
pub fn balanced_minibatch(
    ds: &Dataset,
    per_group: usize,
    seed: u64,
    step: usize,
) -> Result<GroupedBatch> {
    let group_rows = ds.group_rows();
    balanced_minibatch_indexed(ds, &group_rows, per_group, seed, step)
}

fn balanced_minibatch_indexed(
    ds: &Dataset,
    group_rows: &[Vec<usize>],
    per_group: usize,
    seed: u64,
    step: usize,
) -> Result<GroupedBatch> {
    if per_group == 0 {
        return Err(Error::Config("per_group batch size must be >= 1".into()));
    }
    let mut rng = rng_for_step(seed, step as u64);
    let mut indices = Vec::with_capacity(per_group * group_rows.len());
    for (g, rows) in group_rows.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyGroup { group: g });
        }
        for _ in 0..per_group {
            indices.push(rows[rng.random_range(0..rows.len())]);
        }
    }
    Ok(GroupedBatch {
        features: ds.features.select_rows(&indices),
        labels: indices.iter().map(|&i| ds.labels[i]).collect(),
        groups: indices.iter().map(|&i| ds.groups[i]).collect(),
    })
}

/// Reusable sampler that caches the per-group row index lists. Produces
/// batches identical to [`balanced_minibatch`] for the same `(seed, step)`.
pub struct BalancedSampler<'a> {
    ds: &'a Dataset,
    group_rows: Vec<Vec<usize>>,
    per_group: usize,
    seed: u64,
}

impl<'a> BalancedSampler<'a> {
    pub fn new(ds: &'a Dataset, per_group: usize, seed: u64) -> Result<Self> {
        let group_rows = ds.group_rows();
        if let Some(g) = group_rows.iter().position(Vec::is_empty) {
            return Err(Error::EmptyGroup { group: g });
        }
        if per_group == 0 {
            return Err(Error::Config("per_group batch size must be >= 1".into()));
        }
        Ok(BalancedSampler {
            ds,
            group_rows,
            per_group,
            seed,
        })
    }

    pub fn sample(&self, step: usize) -> Result<GroupedBatch> {
        balanced_minibatch_indexed(self.ds, &self.group_rows, self.per_group, self.seed, step)
    }

    pub fn batch_size(&self) -> usize {
        self.per_group * self.group_rows.len()
    }
}

/// Parameters of the bundled synthetic-data generator. Rows carry a label
/// signal along a fixed direction plus Gaussian noise; the per-group positive
/// rates control the group-conditional label shift that induces a baseline
/// positive-rate gap.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub feature_dim: usize,
    pub group_count: usize,
    /// P(label = 1) per group; length must equal `group_count`.
    pub group_positive_rate: Vec<f64>,
    /// Class separation along the signal direction.
    pub margin: f64,
    /// Std of the additive feature noise.
    pub noise_std: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 2000,
            feature_dim: 9,
            group_count: 2,
            group_positive_rate: vec![0.8, 0.2],
            margin: 2.0,
            noise_std: 1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < self.group_count || self.feature_dim == 0 {
            return Err(Error::Config(
                "synthetic data needs rows >= group_count and feature_dim >= 1".into(),
            ));
        }
        if self.group_count < 2 {
            return Err(Error::Config("synthetic data needs >= 2 groups".into()));
        }
        if self.group_positive_rate.len() != self.group_count {
            return Err(Error::Config(format!(
                "expected {} per-group positive rates, got {}",
                self.group_count,
                self.group_positive_rate.len()
            )));
        }
        if self
            .group_positive_rate
            .iter()
            .any(|&p| !(0.0..=1.0).contains(&p))
        {
            return Err(Error::Config("positive rates must lie in [0, 1]".into()));
        }
        if self.noise_std < 0.0 || self.margin < 0.0 {
            return Err(Error::Config("margin and noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Deterministic per seed. The first `group_count` rows cover groups 0..G in
/// order, so ids are already in first-appearance order and every group is
/// nonempty.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let d = spec.feature_dim;
    // Fixed alternating signal direction, unit norm.
    let direction: Vec<f64> = (0..d)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
        .collect();

    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(spec.rows);
    let mut labels = Vec::with_capacity(spec.rows);
    let mut groups = Vec::with_capacity(spec.rows);
    for i in 0..spec.rows {
        let g = if i < spec.group_count {
            i
        } else {
            rng.random_range(0..spec.group_count)
        };
        let y = if rng.random_bool(spec.group_positive_rate[g]) {
            1.0
        } else {
            0.0
        };
        let sign = 2.0 * y - 1.0;
        let row: Vec<f64> = direction
            .iter()
            .map(|&u| spec.margin * sign * u + spec.noise_std * rng.sample(normal))
            .collect();
        rows.push(row);
        labels.push(y);
        groups.push(g);
    }

    let ds = Dataset {
        features: Matrix::from_rows(&rows)?,
        labels,
        groups,
        group_count: spec.group_count,
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
    };
    ds.validate()?;
    Ok(ds)
}
