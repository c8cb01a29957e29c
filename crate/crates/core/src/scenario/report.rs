use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{OutputFormat, ScenarioConfig};
use crate::gnc::TrainOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Run,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gnc,
    Vision,
}

/// Outcome of one training/evaluation pass. GNC runs fill the training
/// fields; vision runs fill accuracy and confidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TrainOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_executed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photon_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub final_mse: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierRow {
    pub condition: String,
    pub photon_scale: Option<f64>,
    pub accuracy: f64,
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub candidates: Vec<f64>,
    pub target_gap: f64,
    pub chosen_photon_scale: f64,
    pub gap: f64,
    pub met: bool,
}

/// Digests taken before and after the attacked run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Integrity {
    pub dataset_digest: u64,
    pub baseline_model_digest: u64,
    pub unchanged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub kind: ReportKind,
    pub model: ModelKind,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub config: ScenarioConfig,
    pub baseline: Option<RunMetrics>,
    pub attacked: Option<RunMetrics>,
    pub sweep: Vec<SweepRow>,
    pub classifier: Vec<ClassifierRow>,
    pub calibration: Option<Calibration>,
    pub integrity: Option<Integrity>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serialize a report.
///
/// CSV holds one table: the sweep (`eta,final_mse,diverged`) for sweep
/// reports, baseline/attacked training rows for GNC runs, and classifier
/// rows for vision runs. Floats carry 17 significant digits. JSON is the
/// full report with fields in declaration order.
pub fn write_report(report: &MetricsReport, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        OutputFormat::Csv => write_csv(report).into_bytes(),
    }
}

fn write_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    match (report.kind, report.model) {
        (ReportKind::Sweep, _) => {
            out.push_str("eta,final_mse,diverged\n");
            for row in &report.sweep {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    float(row.eta),
                    float(row.final_mse),
                    row.diverged
                );
            }
        }
        (ReportKind::Run, ModelKind::Gnc) => {
            out.push_str("condition,attack,eta,epochs,final_mse,diverged,outcome,steps_executed\n");
            let rows = [
                ("baseline", &report.baseline),
                ("attacked", &report.attacked),
            ];
            for (condition, metrics) in rows {
                let Some(m) = metrics else { continue };
                let _ = writeln!(
                    out,
                    "{condition},{},{},{},{},{},{},{}",
                    m.attack.as_deref().unwrap_or(""),
                    opt_float(m.eta),
                    opt(m.epochs),
                    opt_float(m.final_mse),
                    opt(m.diverged),
                    m.outcome.map(TrainOutcome::as_str).unwrap_or(""),
                    opt(m.steps_executed),
                );
            }
        }
        (ReportKind::Run, ModelKind::Vision) => {
            out.push_str("condition,photon_scale,accuracy,mean_confidence\n");
            for row in &report.classifier {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    row.condition,
                    opt_float(row.photon_scale),
                    float(row.accuracy),
                    float(row.mean_confidence),
                );
            }
        }
    }
    out
}
