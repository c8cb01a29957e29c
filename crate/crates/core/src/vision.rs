//! Crater / no-crater patch classifier used by the terrain-relative
//! navigation stand-in.
//!
//! A logistic model over normalized pixels, trained with seeded per-sample
//! SGD on log-loss. A frame is labeled `crater` when the model's
//! confidence is strictly greater than [`DETECTION_THRESHOLD`].

use rand::seq::SliceRandom;
use serde::Serialize;
use thiserror::Error;

use crate::gnc::Hyperparams;
use crate::ingest::{Frame, Label, LabeledFrames};
use crate::par;
use crate::rng::component_rng;

pub const DETECTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("training set must contain both crater and no-crater frames")]
    SingleClassDataset,
    #[error("frame is {found:?}, classifier expects {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub width: u32,
    pub height: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub true_crater: u64,
    pub missed_crater: u64,
    pub false_crater: u64,
    pub true_no_crater: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.true_crater + self.missed_crater + self.false_crater + self.true_no_crater
    }

    pub fn correct(&self) -> u64 {
        self.true_crater + self.true_no_crater
    }

    fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Crater, Label::Crater) => self.true_crater += 1,
            (Label::Crater, Label::NoCrater) => self.missed_crater += 1,
            (Label::NoCrater, Label::Crater) => self.false_crater += 1,
            (Label::NoCrater, Label::NoCrater) => self.true_no_crater += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Mean crater-class confidence over frames whose true label is crater
    /// (0 when there are none).
    pub mean_confidence_crater: f64,
    pub confusion: Confusion,
    pub threshold: f64,
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pixel features in `[0, 1]`, stretched between the frame's own darkest
/// and brightest pixel. A flat frame maps to all zeros.
pub fn normalize(frame: &Frame) -> Vec<f64> {
    let px = frame.pixels();
    let lo = px.iter().copied().min().unwrap_or(0);
    let hi = px.iter().copied().max().unwrap_or(0);
    if hi == lo {
        return vec![0.0; px.len()];
    }
    let span = f64::from(hi - lo);
    px.iter().map(|&p| f64::from(p - lo) / span).collect()
}

fn target(label: Label) -> f64 {
    match label {
        Label::Crater => 1.0,
        Label::NoCrater => 0.0,
    }
}

impl ClassifierParams {
    pub fn zeros(width: u32, height: u32) -> Self {
        ClassifierParams {
            width,
            height,
            weights: vec![0.0; (width * height) as usize],
            bias: 0.0,
        }
    }

    fn check(&self, frame: &Frame) -> Result<(), VisionError> {
        if (frame.width(), frame.height()) != (self.width, self.height) {
            return Err(VisionError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (frame.width(), frame.height()),
            });
        }
        Ok(())
    }

    /// Linear score `w . x + b` on normalized features.
    pub fn score(&self, features: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }
}

/// Log-loss of one normalized sample.
pub fn sample_log_loss(params: &ClassifierParams, features: &[f64], label: Label) -> f64 {
    let z = params.score(features);
    // log(1 + e^z) - y z, computed stably
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - target(label) * z
}

/// Gradient of [`sample_log_loss`] with respect to `(weights, bias)`.
pub fn sample_log_loss_gradient(
    params: &ClassifierParams,
    features: &[f64],
    label: Label,
) -> (Vec<f64>, f64) {
    let r = logistic(params.score(features)) - target(label);
    (features.iter().map(|x| r * x).collect(), r)
}

pub fn train_classifier(
    data: &LabeledFrames,
    hyper: &Hyperparams,
) -> Result<ClassifierParams, VisionError> {
    hyper
        .validate()
        .map_err(|e| VisionError::InvalidHyperparams(e.to_string()))?;
    if data.is_empty() {
        return Err(VisionError::EmptyDataset);
    }
    if !data.has_both_classes() {
        return Err(VisionError::SingleClassDataset);
    }
    let first = &data.frames()[0];
    let mut params = ClassifierParams::zeros(first.width(), first.height());
    let inputs: Vec<Vec<f64>> = data.frames().iter().map(normalize).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = component_rng(hyper.seed);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &inputs[i];
            let r = logistic(params.score(x)) - target(data.labels()[i]);
            let step = hyper.eta * r;
            for (w, xi) in params.weights.iter_mut().zip(x) {
                *w -= step * xi;
            }
            params.bias -= step;
        }
    }
    Ok(params)
}

pub fn classify(params: &ClassifierParams, frame: &Frame) -> Result<(Label, f64), VisionError> {
    params.check(frame)?;
    let confidence = logistic(params.score(&normalize(frame)));
    let label = if confidence > DETECTION_THRESHOLD {
        Label::Crater
    } else {
        Label::NoCrater
    };
    Ok((label, confidence))
}

pub fn evaluate(
    params: &ClassifierParams,
    data: &LabeledFrames,
) -> Result<EvalReport, VisionError> {
    if data.is_empty() {
        return Err(VisionError::EmptyDataset);
    }
    let predictions = par::map(data.frames(), |f| classify(params, f));
    let mut confusion = Confusion::default();
    let mut crater_conf = 0.0;
    let mut craters = 0u64;
    for (prediction, &truth) in predictions.into_iter().zip(data.labels()) {
        let (predicted, confidence) = prediction?;
        confusion.record(truth, predicted);
        if truth == Label::Crater {
            crater_conf += confidence;
            craters += 1;
        }
    }
    Ok(EvalReport {
        accuracy: confusion.correct() as f64 / confusion.total() as f64,
        mean_confidence_crater: if craters > 0 {
            crater_conf / craters as f64
        } else {
            0.0
        },
        confusion,
        threshold: DETECTION_THRESHOLD,
    })
}
