//! Scenario configuration: a strict TOML document.
//!
//! ```toml
//! name = "gnc-poison"
//! master_seed = 7
//!
//! [dataset]
//! kind = "synth_gnc"
//! condition_factor = 1000.0
//!
//! [model]
//! kind = "gnc"
//! eta = 0.01
//!
//! [attack]
//! kind = "learning_rate_poison"
//! ```
//!
//! Unknown keys are rejected. Every omitted optional value is filled with
//! its default, and the resolved config is echoed into the report.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{DEFAULT_POISON_HI, DEFAULT_POISON_LO};
use crate::gnc::{ComputeBudget, DEFAULT_EPOCHS};
use crate::ingest::{Label, DEFAULT_TEST_FRACTION};
use crate::vision::DETECTION_THRESHOLD;

/// Photon scales tried, largest first, when calibrating the evasion attack.
pub const CALIBRATION_SCALES: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

/// Accuracy gap (clean minus attacked) the calibration looks for.
pub const CALIBRATION_GAP: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(
                f,
                "config error at line {line}, `{}`: {}",
                self.field, self.reason
            ),
            None => write!(f, "config error, `{}`: {}", self.field, self.reason),
        }
    }
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}
fn default_epochs() -> u32 {
    DEFAULT_EPOCHS
}
fn default_threshold() -> f64 {
    DETECTION_THRESHOLD
}
fn default_n() -> usize {
    1000
}
fn default_d() -> usize {
    6
}
fn default_condition() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    0.01
}
fn default_per_class() -> usize {
    50
}
fn default_test_per_class() -> usize {
    100
}
fn default_size() -> u32 {
    16
}
fn default_lo() -> f64 {
    DEFAULT_POISON_LO
}
fn default_hi() -> f64 {
    DEFAULT_POISON_HI
}
fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub path: PathBuf,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    SynthGnc {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_condition")]
        condition_factor: f64,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    TelemetryCsv {
        path: PathBuf,
        target: String,
        #[serde(default)]
        features: Vec<String>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    SynthCrater {
        #[serde(default = "default_per_class")]
        n_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        #[serde(default = "default_size")]
        size: u32,
    },
    PgmManifest {
        train: Vec<FrameEntry>,
        test: Vec<FrameEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Gnc {
        eta: f64,
        #[serde(default = "default_epochs")]
        epochs: u32,
    },
    Vision {
        eta: f64,
        #[serde(default = "default_epochs")]
        epochs: u32,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

impl ModelConfig {
    pub fn eta(&self) -> f64 {
        match self {
            ModelConfig::Gnc { eta, .. } | ModelConfig::Vision { eta, .. } => *eta,
        }
    }

    pub fn epochs(&self) -> u32 {
        match self {
            ModelConfig::Gnc { epochs, .. } | ModelConfig::Vision { epochs, .. } => *epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackConfig {
    LearningRatePoison {
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    PoissonEvasion {
        #[serde(default = "default_scale")]
        photon_scale: f64,
        /// Choose the photon scale by sweeping [`CALIBRATION_SCALES`].
        #[serde(default)]
        calibrate: bool,
    },
    EpochInflation {
        factor: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub master_seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<ComputeBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn is_gnc(&self) -> bool {
        matches!(self.model, ModelConfig::Gnc { .. })
    }

    pub fn with_seed(&self, master_seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            master_seed,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Strictly parse and validate a scenario config.
pub fn parse_config(bytes: &[u8]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ConfigError {
        line: None,
        field: String::new(),
        reason: format!("not UTF-8: {e}"),
    })?;
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        field: String::new(),
        reason: e.message().to_owned(),
    })?;
    let config: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| {
            let mut field = e.path().to_string();
            let reason = e.inner().to_string();
            let named = backticked_after(&reason, "unknown field")
                .or_else(|| backticked_after(&reason, "missing field"));
            if let Some(name) = named {
                if field == "." || field.is_empty() {
                    field = name;
                } else if field.rsplit('.').next() != Some(name.as_str()) {
                    field = format!("{field}.{name}");
                }
            }
            ConfigError {
                line: line_of_field(text, &field),
                field,
                reason,
            }
        })?;
    validate(&config).map_err(|(field, reason)| ConfigError {
        line: line_of_field(text, &field),
        field,
        reason,
    })?;
    Ok(config)
}

fn backticked_after(message: &str, prefix: &str) -> Option<String> {
    let rest = message.strip_prefix(prefix)?.trim_start();
    let rest = rest.strip_prefix('`')?;
    rest.split_once('`').map(|(name, _)| name.to_owned())
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Best-effort source line for a dotted field path: the line defining the
/// last key, searched within its table when the path names one.
fn line_of_field(text: &str, field: &str) -> Option<usize> {
    let parts: Vec<&str> = field.split('.').filter(|p| !p.is_empty()).collect();
    let (key, table) = match parts.as_slice() {
        [] => return None,
        [key] => (*key, None),
        [table, .., key] => (*key, Some(*table)),
    };
    let mut current: Option<&str> = None;
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim());
            if Some(name.trim()) == Some(key) && table.is_none() {
                return Some(i + 1);
            }
            if table.is_some() && current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if k.trim() == key && current == table {
            return Some(i + 1);
        }
    }
    table_line
}

type Invalid = (String, String);

fn invalid(field: &str, reason: impl Into<String>) -> Result<(), Invalid> {
    Err((field.to_owned(), reason.into()))
}

fn check(cond: bool, field: &str, reason: &str) -> Result<(), Invalid> {
    if cond {
        Ok(())
    } else {
        invalid(field, reason)
    }
}

fn validate(c: &ScenarioConfig) -> Result<(), Invalid> {
    check(!c.name.trim().is_empty(), "name", "must be nonempty")?;

    match &c.model {
        ModelConfig::Gnc { eta, epochs } => {
            check(*eta > 0.0 && eta.is_finite(), "model.eta", "must be > 0")?;
            check(*epochs >= 1, "model.epochs", "must be >= 1")?;
        }
        ModelConfig::Vision {
            eta,
            epochs,
            threshold,
        } => {
            check(*eta > 0.0 && eta.is_finite(), "model.eta", "must be > 0")?;
            check(*epochs >= 1, "model.epochs", "must be >= 1")?;
            check(
                *threshold == DETECTION_THRESHOLD,
                "model.threshold",
                "detection threshold is fixed at 0.5",
            )?;
        }
    }

    let gnc = c.is_gnc();
    match &c.dataset {
        DatasetConfig::SynthGnc {
            n,
            d,
            condition_factor,
            noise_std,
            test_fraction,
        } => {
            check(gnc, "dataset.kind", "synth_gnc data requires a gnc model")?;
            check(*d >= 2, "dataset.d", "must be >= 2")?;
            check(*n > *d, "dataset.n", "must be >= d + 1")?;
            check(
                *condition_factor >= 1.0,
                "dataset.condition_factor",
                "must be >= 1",
            )?;
            check(*noise_std >= 0.0, "dataset.noise_std", "must be >= 0")?;
            check_fraction(*test_fraction)?;
        }
        DatasetConfig::TelemetryCsv { test_fraction, .. } => {
            check(
                gnc,
                "dataset.kind",
                "telemetry_csv data requires a gnc model",
            )?;
            check_fraction(*test_fraction)?;
        }
        DatasetConfig::SynthCrater {
            n_per_class,
            test_per_class,
            size,
        } => {
            check(
                !gnc,
                "dataset.kind",
                "synth_crater data requires a vision model",
            )?;
            check(*n_per_class >= 1, "dataset.n_per_class", "must be >= 1")?;
            check(
                *test_per_class >= 1,
                "dataset.test_per_class",
                "must be >= 1",
            )?;
            check(*size >= 8, "dataset.size", "must be >= 8")?;
        }
        DatasetConfig::PgmManifest { train, test } => {
            check(
                !gnc,
                "dataset.kind",
                "pgm_manifest data requires a vision model",
            )?;
            check(
                !train.is_empty(),
                "dataset.train",
                "must list at least one frame",
            )?;
            check(
                !test.is_empty(),
                "dataset.test",
                "must list at least one frame",
            )?;
        }
    }

    match &c.attack {
        None => {}
        Some(AttackConfig::LearningRatePoison { lo, hi }) => {
            check(
                gnc,
                "attack.kind",
                "learning_rate_poison targets a gnc model",
            )?;
            check(
                *lo > 0.0 && lo < hi && hi.is_finite(),
                "attack.lo",
                "need 0 < lo < hi",
            )?;
        }
        Some(AttackConfig::PoissonEvasion { photon_scale, .. }) => {
            check(
                !gnc,
                "attack.kind",
                "poisson_evasion targets a vision model",
            )?;
            check(
                *photon_scale > 0.0 && photon_scale.is_finite(),
                "attack.photon_scale",
                "must be > 0",
            )?;
        }
        Some(AttackConfig::EpochInflation { factor }) => {
            check(gnc, "attack.kind", "epoch_inflation targets a gnc model")?;
            check(*factor >= 1, "attack.factor", "must be >= 1")?;
        }
    }

    if let Some(b) = &c.budget {
        check(
            b.max_update_steps > 0,
            "budget.max_update_steps",
            "must be > 0",
        )?;
    }

    if let Some(s) = &c.sweep {
        check(gnc, "sweep", "a learning-rate sweep requires a gnc model")?;
        check(!s.etas.is_empty(), "sweep.etas", "must be nonempty")?;
        check(
            s.etas.iter().all(|e| *e > 0.0 && e.is_finite()),
            "sweep.etas",
            "every eta must be > 0",
        )?;
    }
    Ok(())
}

fn check_fraction(f: f64) -> Result<(), Invalid> {
    check(
        f > 0.0 && f < 1.0,
        "dataset.test_fraction",
        "must be in (0, 1)",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_GNC: &str = r#"
name = "nominal"
master_seed = 1

[dataset]
kind = "synth_gnc"

[model]
kind = "gnc"
eta = 0.001
"#;

    #[test]
    fn minimal_gnc_gets_defaults() {
        let c = parse_config(MINIMAL_GNC.as_bytes()).unwrap();
        assert_eq!(c.model.epochs(), 100);
        assert_eq!(
            c.dataset,
            DatasetConfig::SynthGnc {
                n: 1000,
                d: 6,
                condition_factor: 1.0,
                noise_std: 0.01,
                test_fraction: 0.2
            }
        );
        assert_eq!(c.output.format, OutputFormat::Csv);
        let again = parse_config(c.to_toml().as_bytes()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL_GNC.replace("eta = 0.001", "eta = 0.001\nlearning_rato = 0.5");
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert!(err.field.ends_with("learning_rato"), "{err:?}");
        assert!(err.reason.contains("learning_rato"));
        assert_eq!(err.line, Some(11));
    }

    #[test]
    fn unknown_top_level_key() {
        let text = format!("colour = 3\n{MINIMAL_GNC}");
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert_eq!(err.field, "colour");
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn sweep_with_vision_rejected() {
        let text = r#"
name = "v"
master_seed = 1

[dataset]
kind = "synth_crater"

[model]
kind = "vision"
eta = 0.1

[sweep]
etas = [0.1, 0.2]
"#;
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert_eq!(err.field, "sweep");
        assert_eq!(err.line, Some(12));
    }

    #[test]
    fn attack_must_match_model() {
        let text = format!("{MINIMAL_GNC}\n[attack]\nkind = \"poisson_evasion\"\n");
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert_eq!(err.field, "attack.kind");
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_config(b"name = \"x\"\nmaster_seed = = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn missing_required_field() {
        let text = MINIMAL_GNC.replace("eta = 0.001", "");
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert!(err.reason.contains("eta"), "{err:?}");
    }

    #[test]
    fn threshold_is_fixed() {
        let text = r#"
name = "v"
master_seed = 1
[dataset]
kind = "synth_crater"
[model]
kind = "vision"
eta = 0.1
threshold = 0.7
"#;
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert_eq!(err.field, "model.threshold");
    }

    #[test]
    fn bad_ranges() {
        let bad_lo = format!(
            "{MINIMAL_GNC}\n[attack]\nkind = \"learning_rate_poison\"\nlo = 0.9\nhi = 0.5\n"
        );
        assert_eq!(
            parse_config(bad_lo.as_bytes()).unwrap_err().field,
            "attack.lo"
        );
        let bad_frac = MINIMAL_GNC.replace(
            "kind = \"synth_gnc\"",
            "kind = \"synth_gnc\"\ntest_fraction = 1.5",
        );
        assert_eq!(
            parse_config(bad_frac.as_bytes()).unwrap_err().field,
            "dataset.test_fraction"
        );
    }
}
