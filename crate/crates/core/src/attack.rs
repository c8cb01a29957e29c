//! The three attacks: learning-rate poisoning, Poisson-noise evasion staged
//! as a bus rootkit, and epoch inflation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Interceptor, Payload};
use crate::gnc::Hyperparams;
use crate::ingest::Frame;
use crate::rng::{component_rng, stream_key, Substream};

/// Below this mean the Poisson sampler inverts the CDF; at or above it a
/// rounded Gaussian approximation is used.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

/// Epoch counts saturate here.
pub const EPOCH_CEILING: u64 = (1 << 31) - 1;

pub const DEFAULT_POISON_LO: f64 = 0.5;
pub const DEFAULT_POISON_HI: f64 = 0.9;

pub const ROOTKIT_ID: &str = "rootkit.poisson_evasion";

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("invalid learning-rate range [{lo}, {hi})")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("photon scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("epoch inflation factor must be >= 1")]
    InvalidFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRatePoison {
    pub lo: f64,
    pub hi: f64,
}

impl Default for LearningRatePoison {
    fn default() -> Self {
        LearningRatePoison {
            lo: DEFAULT_POISON_LO,
            hi: DEFAULT_POISON_HI,
        }
    }
}

impl LearningRatePoison {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite() {
            Ok(())
        } else {
            Err(AttackError::InvalidRange {
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonEvasion {
    pub photon_scale: f64,
}

impl Default for PoissonEvasion {
    fn default() -> Self {
        PoissonEvasion { photon_scale: 1.0 }
    }
}

impl PoissonEvasion {
    pub fn validate(&self) -> Result<(), AttackError> {
        validate_scale(self.photon_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochInflation {
    pub factor: u64,
}

impl EpochInflation {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.factor >= 1 {
            Ok(())
        } else {
            Err(AttackError::InvalidFactor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    LearningRatePoison(LearningRatePoison),
    PoissonEvasion(PoissonEvasion),
    EpochInflation(EpochInflation),
}

impl AttackSpec {
    pub fn validate(&self) -> Result<(), AttackError> {
        match self {
            AttackSpec::LearningRatePoison(s) => s.validate(),
            AttackSpec::PoissonEvasion(s) => s.validate(),
            AttackSpec::EpochInflation(s) => s.validate(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AttackSpec::LearningRatePoison(_) => "learning_rate_poison",
            AttackSpec::PoissonEvasion(_) => "poisson_evasion",
            AttackSpec::EpochInflation(_) => "epoch_inflation",
        }
    }
}

fn validate_scale(k: f64) -> Result<(), AttackError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(AttackError::InvalidScale(k))
    }
}

/// Replace the learning rate with a seeded draw from `[lo, hi)`.
pub fn poison_learning_rate(
    hyper: &Hyperparams,
    spec: &LearningRatePoison,
    seed: u64,
) -> Result<Hyperparams, AttackError> {
    spec.validate()?;
    let eta = component_rng(seed).random_range(spec.lo..spec.hi);
    Ok(Hyperparams { eta, ..*hyper })
}

/// Multiply the epoch count, saturating at [`EPOCH_CEILING`].
pub fn inflate_epochs(hyper: &Hyperparams, spec: &EpochInflation) -> Hyperparams {
    let epochs = (u64::from(hyper.epochs))
        .saturating_mul(spec.factor.max(1))
        .min(EPOCH_CEILING);
    Hyperparams {
        epochs: epochs as u32,
        ..*hyper
    }
}

/// One Poisson draw with mean `lambda` from a counter-based stream.
pub fn sample_poisson(lambda: f64, stream: Substream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < POISSON_INVERSION_LIMIT {
        let u = stream.uniform(0);
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        // the tail beyond ~lambda + 40 is far below f64 resolution
        while u >= cdf && k < 200 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k
    } else {
        let z = stream.normal(1);
        (lambda + lambda.sqrt() * z).round().max(0.0) as u64
    }
}

fn perturb_with(frame: &Frame, photon_scale: f64, stream: Substream) -> Frame {
    frame.map_pixels(|i, x| {
        let counts = sample_poisson(photon_scale * f64::from(x), stream.child(i as u64));
        (counts as f64 / photon_scale).round().clamp(0.0, 255.0) as u8
    })
}

/// Replace every pixel `x` with `round(Poisson(k x) / k)`, clamped to
/// `[0, 255]`. `k = 1` is the plain pixel-as-mean model; smaller `k`
/// means fewer effective photons and relatively stronger noise.
pub fn poisson_perturb(frame: &Frame, photon_scale: f64, seed: u64) -> Result<Frame, AttackError> {
    validate_scale(photon_scale)?;
    Ok(perturb_with(
        frame,
        photon_scale,
        Substream::new(stream_key(&[seed, 0])),
    ))
}

/// Bus interceptor that Poisson-perturbs frame payloads in transit.
///
/// Each packet draws from its own substream keyed on `(seed, seq)`, so
/// repeated publishes of one frame receive independent noise. Non-frame
/// payloads pass through untouched.
pub fn make_evasion_rootkit(spec: &PoissonEvasion, seed: u64) -> Result<Interceptor, AttackError> {
    spec.validate()?;
    let k = spec.photon_scale;
    Ok(Interceptor::map_payload(
        ROOTKIT_ID,
        move |packet| match packet.payload() {
            Payload::Frame(frame) => {
                let stream = Substream::new(stream_key(&[seed, packet.seq()]));
                Payload::Frame(perturb_with(frame, k, stream))
            }
            other => other.clone(),
        },
    ))
}
