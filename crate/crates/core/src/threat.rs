//! Rule table mapping a spacecraft profile to the adversarial-ML attack
//! classes it is exposed to.
//!
//! Rules are purely additive: each one inspects the profile and may
//! contribute exactly one finding. No rule suppresses another, so adding a
//! capability to a profile can only grow the report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThreatError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AiClass {
    Predictive,
    Generative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingLocus {
    Preloaded,
    Edge,
    Federated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Eeprom,
    Ssd,
    OffboardOdc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelExposure {
    None,
    QueryInterface,
    SharedFramework,
    FullKnowledge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacecraftProfile {
    pub ai_class: AiClass,
    pub training_locus: TrainingLocus,
    pub storage: Storage,
    pub cdh_write_access: bool,
    pub model_exposure: ModelExposure,
    pub speed_over_accuracy: bool,
    pub power_constrained: bool,
    pub mission_context: String,
}

impl SpacecraftProfile {
    /// `self` grants no capability that `other` lacks: enumerated fields
    /// agree and every flag set here is also set in `other`.
    pub fn is_capability_subset_of(&self, other: &SpacecraftProfile) -> bool {
        let implies = |a: bool, b: bool| !a || b;
        self.ai_class == other.ai_class
            && self.training_locus == other.training_locus
            && self.storage == other.storage
            && self.model_exposure == other.model_exposure
            && implies(self.cdh_write_access, other.cdh_write_access)
            && implies(self.speed_over_accuracy, other.speed_over_accuracy)
            && implies(self.power_constrained, other.power_constrained)
    }
}

pub fn parse_profile(text: &str) -> Result<SpacecraftProfile, ThreatError> {
    toml::from_str(text).map_err(|e| ThreatError::InvalidProfile(e.message().to_owned()))
}

/// Attacker knowledge level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessClass {
    WhiteBox,
    BlackBox,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackClass {
    StoredModelPoisoning,
    ParameterRotation,
    DirectModelPoisoning,
    CrosslinkedModelPoisoning,
    SupplyChainCompromise,
    ModelExtraction,
    TransferAttack,
    TradeoffEvasion,
    ResourceExhaustion,
    Evasion,
    DataPoisoning,
    OffboardNodePoisoning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    R11,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub attack_class: AttackClass,
    pub access: AccessClass,
    pub rationale: String,
    pub anchor: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThreatReport {
    pub mission_context: String,
    pub findings: Vec<Finding>,
}

impl ThreatReport {
    pub fn rule_ids(&self) -> Vec<RuleId> {
        self.findings.iter().map(|f| f.rule_id).collect()
    }
}

struct Rule {
    id: RuleId,
    anchor: &'static str,
    fire: fn(&SpacecraftProfile) -> Option<(AttackClass, AccessClass, &'static str)>,
}

use AccessClass::*;
use AttackClass::*;

const RULES: &[Rule] = &[
    Rule {
        id: RuleId::R1,
        anchor: "storage/ssd",
        fire: |p| {
            (p.storage == Storage::Ssd).then_some((
            StoredModelPoisoning,
            WhiteBox,
            "models and datasets kept on rewritable mass storage can be poisoned or corrupted in place",
        ))
        },
    },
    Rule {
        id: RuleId::R2,
        anchor: "storage/eeprom",
        fire: |p| {
            (p.storage == Storage::Eeprom).then_some((
            ParameterRotation,
            WhiteBox,
            "parameters and thresholds held in EEPROM can be rotated to produce targeted misbehavior",
        ))
        },
    },
    Rule {
        id: RuleId::R3,
        anchor: "cdh/write-access",
        fire: |p| {
            p.cdh_write_access.then_some((
            DirectModelPoisoning,
            WhiteBox,
            "write access to command and data handling allows direct model poisoning or purging the model outright",
        ))
        },
    },
    Rule {
        id: RuleId::R4,
        anchor: "training/federated",
        fire: |p| {
            (p.training_locus == TrainingLocus::Federated).then_some((
            CrosslinkedModelPoisoning,
            WhiteBox,
            "a compromised federated participant can crosslink a poisoned or backdoored model update",
        ))
        },
    },
    Rule {
        id: RuleId::R5,
        anchor: "training/preloaded",
        fire: |p| {
            (p.training_locus == TrainingLocus::Preloaded).then_some((
            SupplyChainCompromise,
            WhiteBox,
            "a model trained on the ground is exposed through the ground segment and supply chain before launch",
        ))
        },
    },
    Rule {
        id: RuleId::R6,
        anchor: "exposure/query-interface",
        fire: |p| {
            (p.model_exposure == ModelExposure::QueryInterface).then_some((
            ModelExtraction,
            BlackBox,
            "an externally queryable model leaks structure and training data to extraction and membership inference",
        ))
        },
    },
    Rule {
        id: RuleId::R7,
        anchor: "exposure/shared-framework",
        fire: |p| {
            (p.model_exposure == ModelExposure::SharedFramework).then_some((
            TransferAttack,
            Transfer,
            "models built on a shared flight-software framework inherit adversarial inputs crafted against sibling models",
        ))
        },
    },
    Rule {
        id: RuleId::R8,
        anchor: "resources/speed-over-accuracy",
        fire: |p| {
            p.speed_over_accuracy.then_some((
            TradeoffEvasion,
            BlackBox,
            "favoring inference speed over accuracy leaves a margin that crafted inputs can exploit",
        ))
        },
    },
    Rule {
        id: RuleId::R9,
        anchor: "resources/power",
        fire: |p| {
            (p.power_constrained
                && matches!(p.training_locus, TrainingLocus::Edge | TrainingLocus::Federated))
            .then_some((
                ResourceExhaustion,
                WhiteBox,
                "on-board training under a tight power budget can be driven into exhaustion by inflating epochs",
            ))
        },
    },
    Rule {
        id: RuleId::R10,
        anchor: "ai-class",
        fire: |p| {
            Some(match p.ai_class {
                AiClass::Predictive => (
                    Evasion,
                    BlackBox,
                    "predictive models are chiefly exposed to inference-time evasion",
                ),
                AiClass::Generative => (
                    DataPoisoning,
                    WhiteBox,
                    "generative models are chiefly exposed to training-data poisoning",
                ),
            })
        },
    },
    Rule {
        id: RuleId::R11,
        anchor: "storage/offboard-odc",
        fire: |p| {
            (p.storage == Storage::OffboardOdc).then_some((
            OffboardNodePoisoning,
            WhiteBox,
            "a model served from an off-board data center can be poisoned at a weakly secured node",
        ))
        },
    },
];

/// All rule anchors, in rule order.
pub fn rule_anchors() -> impl Iterator<Item = &'static str> {
    RULES.iter().map(|r| r.anchor)
}

pub fn assess(profile: &SpacecraftProfile) -> ThreatReport {
    let mut findings: Vec<Finding> = RULES
        .iter()
        .filter_map(|rule| {
            (rule.fire)(profile).map(|(attack_class, access, rationale)| Finding {
                rule_id: rule.id,
                attack_class,
                access,
                rationale: rationale.to_owned(),
                anchor: rule.anchor,
            })
        })
        .collect();
    findings.sort_by_key(|f| f.rule_id);
    ThreatReport {
        mission_context: profile.mission_context.clone(),
        findings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn render_report(report: &ThreatReport, format: ReportFormat) -> Vec<u8> {
    let mut sorted = report.clone();
    sorted.findings.sort_by_key(|f| f.rule_id);
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&sorted).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "AML threat assessment");
            let _ = writeln!(out, "mission_context: {}", sorted.mission_context);
            let _ = writeln!(out, "findings: {}", sorted.findings.len());
            for f in &sorted.findings {
                let _ = writeln!(
                    out,
                    "[{:?}] {} ({})",
                    f.rule_id,
                    snake(&f.attack_class),
                    snake(&f.access)
                );
                let _ = writeln!(out, "    anchor: {}", f.anchor);
                let _ = writeln!(out, "    rationale: {}", f.rationale);
            }
            out.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> SpacecraftProfile {
        SpacecraftProfile {
            ai_class: AiClass::Predictive,
            training_locus: TrainingLocus::Preloaded,
            storage: Storage::Eeprom,
            cdh_write_access: false,
            model_exposure: ModelExposure::None,
            speed_over_accuracy: false,
            power_constrained: false,
            mission_context: "lunar lander".into(),
        }
    }

    #[test]
    fn minimal_profile_fires_three_rules() {
        assert_eq!(
            assess(&minimal()).rule_ids(),
            vec![RuleId::R2, RuleId::R5, RuleId::R10]
        );
    }

    #[test]
    fn cdh_access_adds_direct_poisoning() {
        let p = SpacecraftProfile {
            cdh_write_access: true,
            ..minimal()
        };
        let r = assess(&p);
        let f = r.findings.iter().find(|f| f.rule_id == RuleId::R3).unwrap();
        assert_eq!(f.attack_class, DirectModelPoisoning);
        assert!(f.rationale.contains("purging"));
    }

    #[test]
    fn query_interface_adds_extraction() {
        let p = SpacecraftProfile {
            model_exposure: ModelExposure::QueryInterface,
            ..minimal()
        };
        let r = assess(&p);
        assert!(r
            .findings
            .iter()
            .any(|f| f.rule_id == RuleId::R10 && f.attack_class == Evasion));
        assert!(r
            .findings
            .iter()
            .any(|f| f.rule_id == RuleId::R6 && f.access == BlackBox));
    }

    #[test]
    fn power_rule_needs_onboard_training() {
        let p = SpacecraftProfile {
            power_constrained: true,
            ..minimal()
        };
        assert!(!assess(&p).rule_ids().contains(&RuleId::R9));
        let p = SpacecraftProfile {
            training_locus: TrainingLocus::Edge,
            ..p
        };
        assert!(assess(&p).rule_ids().contains(&RuleId::R9));
    }

    #[test]
    fn generative_gets_data_poisoning() {
        let p = SpacecraftProfile {
            ai_class: AiClass::Generative,
            ..minimal()
        };
        let r = assess(&p);
        assert!(r.findings.iter().any(|f| f.attack_class == DataPoisoning));
    }

    #[test]
    fn anchors_are_unique() {
        let mut a: Vec<_> = rule_anchors().collect();
        assert_eq!(a.len(), 11);
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 11);
    }

    #[test]
    fn empty_report_renders() {
        let r = ThreatReport {
            mission_context: String::new(),
            findings: vec![],
        };
        let json: serde_json::Value =
            serde_json::from_slice(&render_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(json["findings"], serde_json::json!([]));
        let text = String::from_utf8(render_report(&r, ReportFormat::Text)).unwrap();
        assert!(text.contains("findings: 0"));
    }

    #[test]
    fn profile_parsing_is_strict() {
        let ok = r#"
ai_class = "predictive"
training_locus = "edge"
storage = "ssd"
cdh_write_access = false
model_exposure = "query_interface"
speed_over_accuracy = true
power_constrained = true
mission_context = "mars descent"
"#;
        let p = parse_profile(ok).unwrap();
        assert_eq!(p.storage, Storage::Ssd);
        assert!(parse_profile(&format!("{ok}color = \"red\"\n")).is_err());
        assert!(parse_profile(&ok.replace("\"ssd\"", "\"tape\"")).is_err());
        assert!(parse_profile(&ok.replace("power_constrained = true\n", "")).is_err());
    }
}
