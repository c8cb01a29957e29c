//! Seeded stand-ins for the descent telemetry and crater imagery.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, Frame, IngestError, Label, LabeledFrames};
use crate::rng::{component_rng, stream_key};

/// Background level of synthetic terrain frames.
const TERRAIN_LEVEL: f64 = 140.0;
const SPECKLE_STD: f64 = 5.0;
const CRATER_DEPTH: std::ops::Range<f64> = 15.0..25.0;
const LIP_GAIN: f64 = 6.0;
const ILLUMINATION_JITTER: f64 = 8.0;

/// Generator coefficients behind a synthetic GNC dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticGnc {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Linear telemetry with an ill-conditioned feature scale.
///
/// Column `j` of a standard Gaussian design is multiplied by
/// `condition_factor^(j / (d-1))`; the target is `w*.x + b* + noise`.
pub fn synth_gnc_dataset(
    n: usize,
    d: usize,
    condition_factor: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset, IngestError> {
    synth_gnc_with_truth(n, d, condition_factor, noise_std, seed).map(|s| s.dataset)
}

pub fn synth_gnc_with_truth(
    n: usize,
    d: usize,
    condition_factor: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticGnc, IngestError> {
    if d < 2 || n < d + 1 {
        return Err(IngestError::InvalidShape(format!(
            "need d >= 2 and n >= d + 1, got n={n}, d={d}"
        )));
    }
    if !(condition_factor >= 1.0 && condition_factor.is_finite()) {
        return Err(IngestError::InvalidShape(format!(
            "condition factor {condition_factor} < 1"
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(IngestError::InvalidShape(format!("noise std {noise_std}")));
    }
    let mut rng = component_rng(seed);
    let weights: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let bias = rng.random_range(-1.0..1.0);
    let scales: Vec<f64> = (0..d)
        .map(|j| condition_factor.powf(j as f64 / (d - 1) as f64))
        .collect();

    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = bias;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = z * scales[j];
            y += weights[j] * x;
            features.push(x);
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        targets.push(y + noise_std * e);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Ok(SyntheticGnc {
        dataset: Dataset::new(names, features, targets)?,
        truth: GroundTruth { weights, bias },
    })
}

/// Balanced crater / no-crater patches of `size x size` pixels.
///
/// Every frame is textured terrain (speckle around a fixed level with a
/// per-frame illumination offset). Crater frames add a darker bowl with a
/// soft edge and a faint bright lip. Frames alternate crater, no-crater.
pub fn synth_crater_dataset(
    n_per_class: usize,
    size: u32,
    seed: u64,
) -> Result<LabeledFrames, IngestError> {
    if size < 8 || n_per_class == 0 {
        return Err(IngestError::InvalidShape(format!(
            "need size >= 8 and n_per_class >= 1, got size={size}, n={n_per_class}"
        )));
    }
    let mut frames = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for (k, label) in [Label::Crater, Label::NoCrater].into_iter().enumerate() {
            let index = (2 * i + k) as u64;
            frames.push(terrain_frame(size, label, stream_key(&[seed, index])));
            labels.push(label);
        }
    }
    LabeledFrames::new(frames, labels)
}

fn terrain_frame(size: u32, label: Label, seed: u64) -> Frame {
    let mut rng = component_rng(seed);
    let s = f64::from(size);
    let speckle = Normal::new(0.0, SPECKLE_STD).expect("valid std");
    let level = TERRAIN_LEVEL + rng.random_range(-ILLUMINATION_JITTER..ILLUMINATION_JITTER);

    let crater = (label == Label::Crater).then(|| {
        let radius = rng.random_range(s / 6.0..=s / 3.0);
        let jitter = s / 6.0;
        let cx = (s - 1.0) / 2.0 + rng.random_range(-jitter..=jitter);
        let cy = (s - 1.0) / 2.0 + rng.random_range(-jitter..=jitter);
        let depth = rng.random_range(CRATER_DEPTH);
        (radius, cx, cy, depth)
    });

    let n = (size * size) as usize;
    let pixels = (0..n)
        .map(|idx| {
            let x = (idx % size as usize) as f64;
            let y = (idx / size as usize) as f64;
            let mut v = level + speckle.sample(&mut rng);
            if let Some((radius, cx, cy, depth)) = crater {
                let rho = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                let inside = ((radius - rho) / 1.5 + 0.5).clamp(0.0, 1.0);
                let bowl = 0.75 + 0.25 * (1.0 - (rho / radius).powi(2)).max(0.0);
                v -= depth * inside * bowl;
                v += LIP_GAIN * (-((rho - radius) / 1.0).powi(2)).exp();
            }
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame::new(size, size, pixels).expect("dimensions are consistent")
}
