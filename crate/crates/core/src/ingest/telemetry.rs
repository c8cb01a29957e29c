use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;

use super::IngestError;
use crate::rng::{component_rng, Fnv1a};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Tabular telemetry: `n` rows of `d` features plus one target column.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let d = feature_names.len();
        let n = targets.len();
        if n == 0 {
            return Err(IngestError::EmptyDataset);
        }
        if d == 0 {
            return Err(IngestError::InvalidShape("no feature columns".into()));
        }
        if features.len() != n * d {
            return Err(IngestError::InvalidShape(format!(
                "{} feature values for {n} rows of {d} columns",
                features.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(IngestError::InvalidShape(format!(
                    "duplicate column `{name}`"
                )));
            }
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(IngestError::InvalidShape("non-finite value".into()));
        }
        Ok(Dataset {
            feature_names,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            features,
            targets,
        }
    }

    /// FNV-1a over the canonical little-endian encoding of the dataset.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::default();
        for name in &self.feature_names {
            h.write(&(name.len() as u64).to_le_bytes());
            h.write(name.as_bytes());
        }
        for v in self.features.iter().chain(&self.targets) {
            h.write(&v.to_bits().to_le_bytes());
        }
        h.finish()
    }
}

/// Per-column affine scaling recorded by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    /// Apply the recorded scaling to another dataset with the same columns.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset, IngestError> {
        let d = dataset.dim();
        if d != self.means.len() {
            return Err(IngestError::InvalidShape(format!(
                "scaler has {} columns, dataset has {d}",
                self.means.len()
            )));
        }
        let mut features = dataset.features.clone();
        for row in features.chunks_exact_mut(d) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(Dataset {
            feature_names: dataset.feature_names.clone(),
            features,
            targets: dataset.targets.clone(),
        })
    }
}

pub fn load_telemetry_csv(
    path: impl AsRef<Path>,
    feature_columns: &[String],
    target_column: &str,
) -> Result<Dataset, IngestError> {
    let file = std::fs::File::open(path)?;
    parse_telemetry_csv(file, feature_columns, target_column)
}

/// Parse comma-separated telemetry with a header row.
///
/// An empty `feature_columns` selects every column other than the target.
pub fn parse_telemetry_csv<R: Read>(
    reader: R,
    feature_columns: &[String],
    target_column: &str,
) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let index_of = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
    };

    let target_idx = index_of(target_column)?;
    let feature_names: Vec<String> = if feature_columns.is_empty() {
        header
            .iter()
            .filter(|h| h.as_str() != target_column)
            .cloned()
            .collect()
    } else {
        feature_columns.to_vec()
    };
    let feature_idx = feature_names
        .iter()
        .map(|n| index_of(n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize| -> Result<f64, IngestError> {
            let raw = record.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IngestError::MalformedNumber {
                    line,
                    column: header[idx].clone(),
                    value: raw.to_owned(),
                }),
            }
        };
        for &j in &feature_idx {
            features.push(cell(j)?);
        }
        targets.push(cell(target_idx)?);
    }
    Dataset::new(feature_names, features, targets)
}

/// Scale every feature column to zero mean and unit population standard
/// deviation. Constant columns map to zero with a recorded std of 1.
/// Targets are left untouched.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, ScalerParams), IngestError> {
    let n = dataset.len();
    if n < 2 {
        return Err(IngestError::EmptyDataset);
    }
    let d = dataset.dim();
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    for j in 0..d {
        let mean = dataset.column(j).sum::<f64>() / n as f64;
        let var = dataset.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        means[j] = mean;
        if std > 1e-12 * mean.abs().max(1.0) {
            stds[j] = std;
        }
    }
    let params = ScalerParams { means, stds };
    let scaled = params.apply(dataset)?;
    Ok((scaled, params))
}

/// Seeded shuffle, then split off `round(n * test_fraction)` rows
/// (clamped to `[1, n-1]`) as the test set.
pub fn split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), IngestError> {
    let n = dataset.len();
    if n < 2 {
        return Err(IngestError::EmptyDataset);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(IngestError::InvalidShape(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut component_rng(seed));
    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((dataset.select(train_idx), dataset.select(test_idx)))
}
