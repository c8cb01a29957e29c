use std::collections::BTreeMap;

use thiserror::Error;

use super::config::{
    AttackConfig, ConfigError, DatasetConfig, ModelConfig, ScenarioConfig, CALIBRATION_GAP,
    CALIBRATION_SCALES,
};
use super::report::{
    Calibration, ClassifierRow, Integrity, MetricsReport, ModelKind, ReportKind, RunMetrics,
    SweepRow,
};
use crate::attack::{
    self, make_evasion_rootkit, AttackError, EpochInflation, LearningRatePoison, PoissonEvasion,
};
use crate::bus::{BusError, Command, Payload, SoftwareBus, TelemetryRecord};
use crate::gnc::{self, ComputeBudget, GncError, Hyperparams, ModelParams, TrainOutcome};
use crate::ingest::{self, Dataset, IngestError, LabeledFrames};
use crate::par;
use crate::rng::{derive_seed, Fnv1a};
use crate::vision::{self, ClassifierParams, EvalReport, VisionError};

pub const TELEMETRY_TOPIC: &str = "gnc.telemetry";
pub const COMMAND_TOPIC: &str = "gnc.command";
pub const FRAME_TOPIC: &str = "trn.frames";

const GNC_APP: &str = "gnc";
const TRN_APP: &str = "trn";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Gnc(#[from] GncError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("baseline artifacts changed during the attacked run")]
    Integrity,
    #[error("{0}")]
    Mismatch(String),
}

impl ScenarioError {
    pub fn is_config(&self) -> bool {
        matches!(self, ScenarioError::Config(_))
    }
}

fn config_error(field: &str, reason: &str) -> ScenarioError {
    ScenarioError::Config(ConfigError {
        line: None,
        field: field.to_owned(),
        reason: reason.to_owned(),
    })
}

/// Per-component seeds, recorded as they are handed out.
struct Seeds {
    master: u64,
    issued: BTreeMap<String, u64>,
}

impl Seeds {
    fn new(master: u64) -> Self {
        Seeds {
            master,
            issued: BTreeMap::new(),
        }
    }

    fn get(&mut self, component: &str) -> u64 {
        let seed = derive_seed(self.master, component);
        self.issued.insert(component.to_owned(), seed);
        seed
    }
}

struct GncData {
    train: Dataset,
    test: Dataset,
}

fn prepare_gnc(config: &ScenarioConfig, seeds: &mut Seeds) -> Result<GncData, ScenarioError> {
    let (raw, test_fraction) = match &config.dataset {
        DatasetConfig::SynthGnc {
            n,
            d,
            condition_factor,
            noise_std,
            test_fraction,
        } => (
            ingest::synth_gnc_dataset(
                *n,
                *d,
                *condition_factor,
                *noise_std,
                seeds.get("gnc.data"),
            )?,
            *test_fraction,
        ),
        DatasetConfig::TelemetryCsv {
            path,
            target,
            features,
            test_fraction,
        } => (
            ingest::load_telemetry_csv(path, features, target)?,
            *test_fraction,
        ),
        _ => return Err(config_error("dataset.kind", "not a telemetry dataset")),
    };
    let (scaled, _) = ingest::standardize(&raw)?;
    let (train, test) = ingest::split(&scaled, test_fraction, seeds.get("gnc.split"))?;
    Ok(GncData { train, test })
}

/// Flight-side GNC application: takes hyperparameter commands off the bus,
/// trains, and scores itself on telemetry received from the bus.
struct GncApp {
    bus: SoftwareBus,
    hyper: Hyperparams,
}

impl GncApp {
    fn new(hyper: Hyperparams) -> Result<Self, ScenarioError> {
        let mut bus = SoftwareBus::new();
        bus.subscribe(COMMAND_TOPIC, GNC_APP)?;
        bus.subscribe(TELEMETRY_TOPIC, GNC_APP)?;
        Ok(GncApp { bus, hyper })
    }

    fn apply_commands(&mut self) -> Result<Vec<Payload>, ScenarioError> {
        let mut rest = Vec::new();
        for packet in self.bus.drain(GNC_APP)? {
            match packet.into_payload() {
                Payload::Command(Command { opcode, args }) => {
                    let arg = args.first().map(String::as_str).unwrap_or("");
                    match opcode.as_str() {
                        "SET_LEARNING_RATE" => {
                            self.hyper.eta = arg
                                .parse()
                                .map_err(|_| ScenarioError::Mismatch(format!("bad eta {arg:?}")))?;
                        }
                        "SET_EPOCHS" => {
                            self.hyper.epochs = arg.parse().map_err(|_| {
                                ScenarioError::Mismatch(format!("bad epochs {arg:?}"))
                            })?;
                        }
                        other => {
                            return Err(ScenarioError::Mismatch(format!("unknown opcode {other}")))
                        }
                    }
                }
                other => rest.push(other),
            }
        }
        Ok(rest)
    }

    fn run(
        mut self,
        data: &GncData,
        budget: Option<ComputeBudget>,
    ) -> Result<(RunMetrics, Option<ModelParams>), ScenarioError> {
        self.apply_commands()?;
        self.bus.step();
        let trained = gnc::train_sgd(&data.train, &self.hyper, budget);

        for (x, &y) in data.test.rows().zip(data.test.targets()) {
            self.bus.publish(
                TELEMETRY_TOPIC,
                Payload::Telemetry(TelemetryRecord {
                    features: x.to_vec(),
                    target: y,
                }),
            );
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for payload in self.apply_commands()? {
            if let Payload::Telemetry(t) = payload {
                features.extend(t.features);
                targets.push(t.target);
            }
        }
        let received = Dataset::new(data.test.feature_names().to_vec(), features, targets)?;

        let mut metrics = RunMetrics {
            attack: None,
            eta: Some(self.hyper.eta),
            epochs: Some(self.hyper.epochs),
            final_mse: None,
            diverged: None,
            outcome: None,
            steps_executed: None,
            photon_scale: None,
            accuracy: None,
            mean_confidence: None,
        };
        match trained {
            Ok((params, trace)) => {
                metrics.final_mse = Some(gnc::mse(&params, &received)?);
                metrics.diverged = Some(trace.diverged);
                metrics.outcome = Some(trace.outcome());
                metrics.steps_executed = Some(trace.steps_executed);
                Ok((metrics, Some(params)))
            }
            Err(GncError::BudgetExhausted { steps_executed, .. }) => {
                metrics.diverged = Some(false);
                metrics.outcome = Some(TrainOutcome::BudgetExhausted);
                metrics.steps_executed = Some(steps_executed);
                Ok((metrics, None))
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn command(opcode: &str, arg: String) -> Payload {
    Payload::Command(Command {
        opcode: opcode.to_owned(),
        args: vec![arg],
    })
}

fn gnc_digest(data: &GncData, params: Option<&ModelParams>) -> (u64, u64) {
    let mut h = Fnv1a::default();
    h.write(&data.train.digest().to_le_bytes());
    h.write(&data.test.digest().to_le_bytes());
    (h.finish(), params.map_or(0, ModelParams::digest))
}

fn run_gnc(config: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let ModelConfig::Gnc { eta, epochs } = config.model else {
        return Err(config_error("model.kind", "expected gnc"));
    };
    let mut seeds = Seeds::new(config.master_seed);
    let data = prepare_gnc(config, &mut seeds)?;
    let hyper = Hyperparams::new(eta, epochs, seeds.get("gnc.train"))?;

    let (baseline, baseline_params) = GncApp::new(hyper)?.run(&data, config.budget)?;
    let before = gnc_digest(&data, baseline_params.as_ref());

    let attacked = match &config.attack {
        None => None,
        Some(AttackConfig::LearningRatePoison { lo, hi }) => {
            let spec = LearningRatePoison { lo: *lo, hi: *hi };
            let poisoned = attack::poison_learning_rate(&hyper, &spec, seeds.get("attack.poison"))?;
            let mut app = GncApp::new(hyper)?;
            app.bus.publish(
                COMMAND_TOPIC,
                command("SET_LEARNING_RATE", format!("{:?}", poisoned.eta)),
            );
            let (mut m, _) = app.run(&data, config.budget)?;
            m.attack = Some("learning_rate_poison".into());
            Some(m)
        }
        Some(AttackConfig::EpochInflation { factor }) => {
            let inflated = attack::inflate_epochs(&hyper, &EpochInflation { factor: *factor });
            let mut app = GncApp::new(hyper)?;
            app.bus.publish(
                COMMAND_TOPIC,
                command("SET_EPOCHS", inflated.epochs.to_string()),
            );
            let (mut m, _) = app.run(&data, config.budget)?;
            m.attack = Some("epoch_inflation".into());
            Some(m)
        }
        Some(AttackConfig::PoissonEvasion { .. }) => {
            return Err(config_error(
                "attack.kind",
                "poisson_evasion targets a vision model",
            ))
        }
    };

    let after = gnc_digest(&data, baseline_params.as_ref());
    if before != after {
        return Err(ScenarioError::Integrity);
    }

    let sweep = match &config.sweep {
        Some(s) => sweep_rows(&data, &hyper, &s.etas)?,
        None => Vec::new(),
    };

    Ok(MetricsReport {
        scenario: config.name.clone(),
        kind: ReportKind::Run,
        model: ModelKind::Gnc,
        master_seed: config.master_seed,
        seeds: seeds.issued,
        config: config.clone(),
        baseline: Some(baseline),
        attacked,
        sweep,
        classifier: Vec::new(),
        calibration: None,
        integrity: Some(Integrity {
            dataset_digest: before.0,
            baseline_model_digest: before.1,
            unchanged: true,
        }),
    })
}

fn sweep_rows(
    data: &GncData,
    hyper: &Hyperparams,
    etas: &[f64],
) -> Result<Vec<SweepRow>, ScenarioError> {
    par::map(etas, |&eta| -> Result<SweepRow, ScenarioError> {
        let h = Hyperparams::new(eta, hyper.epochs, hyper.seed)?;
        let (params, trace) = gnc::train_sgd(&data.train, &h, None)?;
        Ok(SweepRow {
            eta,
            final_mse: gnc::mse(&params, &data.test)?,
            diverged: trace.diverged,
        })
    })
    .into_iter()
    .collect()
}

/// One training run per learning rate on fixed data and seed; rows follow
/// the order of `etas`.
pub fn sweep_learning_rate(
    config: &ScenarioConfig,
    etas: &[f64],
) -> Result<MetricsReport, ScenarioError> {
    let ModelConfig::Gnc { eta, epochs } = config.model else {
        return Err(config_error(
            "sweep",
            "a learning-rate sweep requires a gnc model",
        ));
    };
    if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(config_error("sweep.etas", "every eta must be > 0"));
    }
    let mut seeds = Seeds::new(config.master_seed);
    let data = prepare_gnc(config, &mut seeds)?;
    let hyper = Hyperparams::new(eta, epochs, seeds.get("gnc.train"))?;
    let sweep = sweep_rows(&data, &hyper, etas)?;
    Ok(MetricsReport {
        scenario: config.name.clone(),
        kind: ReportKind::Sweep,
        model: ModelKind::Gnc,
        master_seed: config.master_seed,
        seeds: seeds.issued,
        config: config.clone(),
        baseline: None,
        attacked: None,
        sweep,
        classifier: Vec::new(),
        calibration: None,
        integrity: None,
    })
}

fn load_manifest(entries: &[super::config::FrameEntry]) -> Result<LabeledFrames, ScenarioError> {
    let frames = entries
        .iter()
        .map(|e| ingest::load_frame_pgm(&e.path))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledFrames::new(
        frames,
        entries.iter().map(|e| e.label).collect(),
    )?)
}

/// Send every frame over a fresh bus, one per tick, with an optional
/// rootkit on the frame topic; return what the TRN component received.
fn deliver_frames(
    frames: &LabeledFrames,
    rootkit: Option<(&PoissonEvasion, u64)>,
) -> Result<LabeledFrames, ScenarioError> {
    let mut bus = SoftwareBus::new();
    bus.subscribe(FRAME_TOPIC, TRN_APP)?;
    if let Some((spec, seed)) = rootkit {
        bus.register_interceptor(FRAME_TOPIC, make_evasion_rootkit(spec, seed)?)?;
    }
    for frame in frames.frames() {
        bus.publish(FRAME_TOPIC, Payload::Frame(frame.clone()));
        bus.step();
    }
    let received: Vec<_> = bus
        .drain(TRN_APP)?
        .into_iter()
        .filter_map(|p| match p.into_payload() {
            Payload::Frame(f) => Some(f),
            _ => None,
        })
        .collect();
    if received.len() != frames.len() {
        return Err(ScenarioError::Mismatch(format!(
            "{} of {} frames delivered",
            received.len(),
            frames.len()
        )));
    }
    Ok(frames.with_frames(received)?)
}

fn vision_metrics(
    eval: &EvalReport,
    photon_scale: Option<f64>,
    attack: Option<&str>,
) -> RunMetrics {
    RunMetrics {
        attack: attack.map(str::to_owned),
        eta: None,
        epochs: None,
        final_mse: None,
        diverged: None,
        outcome: None,
        steps_executed: None,
        photon_scale,
        accuracy: Some(eval.accuracy),
        mean_confidence: Some(eval.mean_confidence_crater),
    }
}

fn classifier_digest(
    params: &ClassifierParams,
    train: &LabeledFrames,
    test: &LabeledFrames,
) -> (u64, u64) {
    let mut data = Fnv1a::default();
    for set in [train, test] {
        for (f, l) in set.iter() {
            data.write(&Payload::Frame(f.clone()).digest().to_le_bytes());
            data.write(&[l as u8]);
        }
    }
    let mut model = Fnv1a::default();
    for w in &params.weights {
        model.write(&w.to_bits().to_le_bytes());
    }
    model.write(&params.bias.to_bits().to_le_bytes());
    (data.finish(), model.finish())
}

fn run_vision(config: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let ModelConfig::Vision { eta, epochs, .. } = config.model else {
        return Err(config_error("model.kind", "expected vision"));
    };
    let mut seeds = Seeds::new(config.master_seed);
    let (train, test) = match &config.dataset {
        DatasetConfig::SynthCrater {
            n_per_class,
            test_per_class,
            size,
        } => (
            ingest::synth_crater_dataset(*n_per_class, *size, seeds.get("vision.data.train"))?,
            ingest::synth_crater_dataset(*test_per_class, *size, seeds.get("vision.data.test"))?,
        ),
        DatasetConfig::PgmManifest { train, test } => (load_manifest(train)?, load_manifest(test)?),
        _ => return Err(config_error("dataset.kind", "not a frame dataset")),
    };
    let hyper = Hyperparams::new(eta, epochs, seeds.get("vision.train"))?;
    let params = vision::train_classifier(&train, &hyper)?;
    let before = classifier_digest(&params, &train, &test);

    let clean = vision::evaluate(&params, &deliver_frames(&test, None)?)?;
    let mut rows = vec![ClassifierRow {
        condition: "clean".into(),
        photon_scale: None,
        accuracy: clean.accuracy,
        mean_confidence: clean.mean_confidence_crater,
    }];
    let baseline = vision_metrics(&clean, None, None);

    let mut calibration = None;
    let attacked = match &config.attack {
        None => None,
        Some(AttackConfig::PoissonEvasion {
            photon_scale,
            calibrate,
        }) => {
            let rootkit_seed = seeds.get("attack.rootkit");
            let evaluate_at = |k: f64| -> Result<EvalReport, ScenarioError> {
                let spec = PoissonEvasion { photon_scale: k };
                let frames = deliver_frames(&test, Some((&spec, rootkit_seed)))?;
                Ok(vision::evaluate(&params, &frames)?)
            };
            let k = if *calibrate {
                let evals = par::map(&CALIBRATION_SCALES, |&k| evaluate_at(k))
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()?;
                for (k, e) in CALIBRATION_SCALES.iter().zip(&evals) {
                    rows.push(ClassifierRow {
                        condition: "calibration".into(),
                        photon_scale: Some(*k),
                        accuracy: e.accuracy,
                        mean_confidence: e.mean_confidence_crater,
                    });
                }
                let gaps: Vec<f64> = evals.iter().map(|e| clean.accuracy - e.accuracy).collect();
                let pick = gaps
                    .iter()
                    .position(|&g| g >= CALIBRATION_GAP)
                    .unwrap_or(CALIBRATION_SCALES.len() - 1);
                calibration = Some(Calibration {
                    candidates: CALIBRATION_SCALES.to_vec(),
                    target_gap: CALIBRATION_GAP,
                    chosen_photon_scale: CALIBRATION_SCALES[pick],
                    gap: gaps[pick],
                    met: gaps[pick] >= CALIBRATION_GAP,
                });
                CALIBRATION_SCALES[pick]
            } else {
                *photon_scale
            };
            let eval = evaluate_at(k)?;
            rows.push(ClassifierRow {
                condition: "attacked".into(),
                photon_scale: Some(k),
                accuracy: eval.accuracy,
                mean_confidence: eval.mean_confidence_crater,
            });
            Some(vision_metrics(&eval, Some(k), Some("poisson_evasion")))
        }
        Some(_) => {
            return Err(config_error(
                "attack.kind",
                "only poisson_evasion targets a vision model",
            ))
        }
    };

    let after = classifier_digest(&params, &train, &test);
    if before != after {
        return Err(ScenarioError::Integrity);
    }

    Ok(MetricsReport {
        scenario: config.name.clone(),
        kind: ReportKind::Run,
        model: ModelKind::Vision,
        master_seed: config.master_seed,
        seeds: seeds.issued,
        config: config.clone(),
        baseline: Some(baseline),
        attacked,
        sweep: Vec::new(),
        classifier: rows,
        calibration,
        integrity: Some(Integrity {
            dataset_digest: before.0,
            baseline_model_digest: before.1,
            unchanged: true,
        }),
    })
}

/// Run the baseline and, when configured, the attacked variant. A GNC
/// scenario with a sweep table and no attack is a pure sweep.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    match (&config.model, &config.sweep, &config.attack) {
        (ModelConfig::Gnc { .. }, Some(sweep), None) => sweep_learning_rate(config, &sweep.etas),
        (ModelConfig::Gnc { .. }, _, _) => run_gnc(config),
        (ModelConfig::Vision { .. }, _, _) => run_vision(config),
    }
}

/// The same scenario under each master seed, in parallel when enabled.
pub fn run_trials(
    config: &ScenarioConfig,
    seeds: &[u64],
) -> Vec<Result<MetricsReport, ScenarioError>> {
    par::map(seeds, |&s| run_scenario(&config.with_seed(s)))
}
