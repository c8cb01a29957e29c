//! Delta-velocity regressor trained by per-sample stochastic gradient
//! descent, plus a closed-form least-squares oracle.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::rng::{component_rng, Fnv1a};

/// Finite stand-in for an MSE that overflowed.
pub const DIVERGED_MSE: f64 = f64::MAX;

/// Epoch MSE above this multiple of the first-epoch MSE counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e12;

pub const DEFAULT_EPOCHS: u32 = 100;

/// Largest feature count the normal-equation oracle accepts.
pub const OLS_MAX_FEATURES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum GncError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("compute budget of {budget} update steps exhausted")]
    BudgetExhausted { budget: u64, steps_executed: u64 },
    #[error("normal equations are singular")]
    SingularMatrix,
    #[error("closed-form oracle supports at most {OLS_MAX_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub eta: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Hyperparams {
    pub fn new(eta: f64, epochs: u32, seed: u64) -> Result<Self, GncError> {
        let h = Hyperparams { eta, epochs, seed };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), GncError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(GncError::InvalidHyperparams(format!(
                "eta {} <= 0",
                self.eta
            )));
        }
        if self.epochs == 0 {
            return Err(GncError::InvalidHyperparams("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Linear model `weights . x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(d: usize) -> Self {
        ModelParams {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::default();
        for w in &self.weights {
            h.write(&w.to_bits().to_le_bytes());
        }
        h.write(&self.bias.to_bits().to_le_bytes());
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainOutcome {
    Completed,
    Diverged,
    BudgetExhausted,
}

impl TrainOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainOutcome::Completed => "completed",
            TrainOutcome::Diverged => "diverged",
            TrainOutcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Training MSE after each epoch; non-finite values are stored as
    /// [`DIVERGED_MSE`].
    pub epoch_mse: Vec<f64>,
    pub diverged: bool,
    pub steps_executed: u64,
}

impl TrainTrace {
    pub fn outcome(&self) -> TrainOutcome {
        if self.diverged {
            TrainOutcome::Diverged
        } else {
            TrainOutcome::Completed
        }
    }
}

/// Cap on per-sample updates; exceeding it is the simulated denial of
/// service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeBudget {
    pub max_update_steps: u64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn predict(params: &ModelParams, features: &[f64]) -> Result<f64, GncError> {
    if features.len() != params.weights.len() {
        return Err(GncError::DimensionMismatch {
            expected: params.weights.len(),
            found: features.len(),
        });
    }
    Ok(dot(&params.weights, features) + params.bias)
}

/// Mean squared error over the dataset, or [`DIVERGED_MSE`] when it is
/// not finite.
pub fn mse(params: &ModelParams, dataset: &Dataset) -> Result<f64, GncError> {
    if dataset.is_empty() {
        return Err(GncError::EmptyDataset);
    }
    if dataset.dim() != params.weights.len() {
        return Err(GncError::DimensionMismatch {
            expected: params.weights.len(),
            found: dataset.dim(),
        });
    }
    Ok(sentinel(unchecked_mse(params, dataset)))
}

fn unchecked_mse(params: &ModelParams, dataset: &Dataset) -> f64 {
    let total: f64 = dataset
        .rows()
        .zip(dataset.targets())
        .map(|(x, &y)| (dot(&params.weights, x) + params.bias - y).powi(2))
        .sum();
    total / dataset.len() as f64
}

fn sentinel(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        DIVERGED_MSE
    }
}

/// Per-sample loss `0.5 * (w.x + b - y)^2`.
pub fn sample_loss(params: &ModelParams, x: &[f64], y: f64) -> f64 {
    0.5 * (dot(&params.weights, x) + params.bias - y).powi(2)
}

/// Gradient of [`sample_loss`] with respect to `(weights, bias)`.
pub fn sample_gradient(params: &ModelParams, x: &[f64], y: f64) -> (Vec<f64>, f64) {
    let residual = dot(&params.weights, x) + params.bias - y;
    (x.iter().map(|xi| residual * xi).collect(), residual)
}

/// Train from zero initialization with one update per sample and a
/// seeded reshuffle each epoch.
///
/// Training stops early, flagged as diverged, when a parameter becomes
/// non-finite or an epoch's MSE exceeds [`DIVERGENCE_RATIO`] times the
/// first epoch's. With a budget, attempting update number
/// `max_update_steps + 1` fails with [`GncError::BudgetExhausted`].
pub fn train_sgd(
    train: &Dataset,
    hyper: &Hyperparams,
    budget: Option<ComputeBudget>,
) -> Result<(ModelParams, TrainTrace), GncError> {
    hyper.validate()?;
    if train.is_empty() {
        return Err(GncError::EmptyDataset);
    }
    let d = train.dim();
    let mut params = ModelParams::zeros(d);
    let mut rng = component_rng(hyper.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = TrainTrace {
        epoch_mse: Vec::new(),
        diverged: false,
        steps_executed: 0,
    };
    let limit = budget.map(|b| b.max_update_steps);

    'epochs: for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if limit.is_some_and(|max| trace.steps_executed >= max) {
                return Err(GncError::BudgetExhausted {
                    budget: limit.unwrap_or_default(),
                    steps_executed: trace.steps_executed,
                });
            }
            let x = train.row(i);
            let residual = dot(&params.weights, x) + params.bias - train.target(i);
            let step = hyper.eta * residual;
            for (w, xi) in params.weights.iter_mut().zip(x) {
                *w -= step * xi;
            }
            params.bias -= step;
            trace.steps_executed += 1;
            if !params.is_finite() {
                trace.diverged = true;
                trace.epoch_mse.push(DIVERGED_MSE);
                break 'epochs;
            }
        }
        let epoch_mse = unchecked_mse(&params, train);
        trace.epoch_mse.push(sentinel(epoch_mse));
        let first = trace.epoch_mse[0];
        if !epoch_mse.is_finite() || epoch_mse > DIVERGENCE_RATIO * first {
            trace.diverged = true;
            break;
        }
    }
    Ok((params, trace))
}

/// Least squares with an intercept, by Gaussian elimination with partial
/// pivoting on the normal equations.
pub fn closed_form_ols(train: &Dataset) -> Result<ModelParams, GncError> {
    if train.is_empty() {
        return Err(GncError::EmptyDataset);
    }
    let d = train.dim();
    if d > OLS_MAX_FEATURES {
        return Err(GncError::TooManyFeatures(d));
    }
    let m = d + 1;
    // augmented [A^T A | A^T y], A = [X 1]
    let mut a = vec![vec![0.0; m + 1]; m];
    let mut design = vec![0.0; m];
    for (x, &y) in train.rows().zip(train.targets()) {
        design[..d].copy_from_slice(x);
        design[d] = 1.0;
        for r in 0..m {
            for c in 0..m {
                a[r][c] += design[r] * design[c];
            }
            a[r][m] += design[r] * y;
        }
    }

    let scale = (0..m).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        if a[pivot][col].abs() <= tol {
            return Err(GncError::SingularMatrix);
        }
        a.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col] / pivot_row[col];
            if factor != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= factor * p;
                }
            }
        }
    }
    let mut sol = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|c| a[r][c] * sol[c]).sum();
        sol[r] = (a[r][m] - tail) / a[r][r];
    }
    let bias = sol.pop().expect("intercept term");
    Ok(ModelParams { weights: sol, bias })
}
