#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use fsw_aml::scenario::{parse_config, ScenarioConfig};
use fsw_aml::threat::{
    parse_profile, AiClass, ModelExposure, RuleId, SpacecraftProfile, Storage, TrainingLocus,
};

pub const SCENARIOS: [&str; 5] = [
    "gnc_nominal",
    "gnc_sweep",
    "gnc_poison",
    "epoch_inflation",
    "vision_evasion",
];

pub const PROFILES: [&str; 3] = ["minimal", "cdh_access", "query_interface"];

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(format!("{name}.toml"))
}

pub fn profile_path(name: &str) -> PathBuf {
    repo_root().join("profiles").join(format!("{name}.toml"))
}

pub fn golden_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(file)
}

pub fn load_scenario(name: &str) -> ScenarioConfig {
    let bytes = std::fs::read(scenario_path(name)).expect("scenario file readable");
    parse_config(&bytes).expect("shipped scenario parses")
}

pub fn load_profile(name: &str) -> SpacecraftProfile {
    let text = std::fs::read_to_string(profile_path(name)).expect("profile readable");
    parse_profile(&text).expect("shipped profile parses")
}

/// Rule-table walk written independently of the engine: which rules fire
/// for a profile.
pub fn expected_rules(p: &SpacecraftProfile) -> BTreeSet<RuleId> {
    let mut out = BTreeSet::new();
    if p.storage == Storage::Ssd {
        out.insert(RuleId::R1);
    }
    if p.storage == Storage::Eeprom {
        out.insert(RuleId::R2);
    }
    if p.cdh_write_access {
        out.insert(RuleId::R3);
    }
    if p.training_locus == TrainingLocus::Federated {
        out.insert(RuleId::R4);
    }
    if p.training_locus == TrainingLocus::Preloaded {
        out.insert(RuleId::R5);
    }
    if p.model_exposure == ModelExposure::QueryInterface {
        out.insert(RuleId::R6);
    }
    if p.model_exposure == ModelExposure::SharedFramework {
        out.insert(RuleId::R7);
    }
    if p.speed_over_accuracy {
        out.insert(RuleId::R8);
    }
    if p.power_constrained
        && matches!(
            p.training_locus,
            TrainingLocus::Edge | TrainingLocus::Federated
        )
    {
        out.insert(RuleId::R9);
    }
    if matches!(p.ai_class, AiClass::Predictive | AiClass::Generative) {
        out.insert(RuleId::R10);
    }
    if p.storage == Storage::OffboardOdc {
        out.insert(RuleId::R11);
    }
    out
}

/// Compare against a golden file, or rewrite it when `UPDATE_GOLDEN` is set.
pub fn check_golden(file: &str, actual: &[u8]) -> Result<(), String> {
    let path = golden_path(file);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| {
        format!(
            "{}: {e} (run with UPDATE_GOLDEN=1 to create)",
            path.display()
        )
    })?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!(
            "{} differs from the current output",
            path.display()
        ))
    }
}
