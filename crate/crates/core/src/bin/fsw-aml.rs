use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fsw_aml::scenario::{
    parse_config, run_scenario, sweep_learning_rate, write_report, OutputFormat, ScenarioConfig,
    ScenarioError,
};
use fsw_aml::threat::{assess, parse_profile, render_report, ReportFormat};

#[derive(Parser)]
#[command(
    name = "fsw-aml",
    version,
    about = "Adversarial ML attack simulator for flight software"
)]
struct Cli {
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario: baseline, then the configured attack.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<DataFormat>,
    },
    /// Sweep the GNC learning rate over a list of values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<DataFormat>,
    },
    /// Map a spacecraft profile to applicable attack classes.
    Assess {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: TextFormat,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&bytes).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    Ok(config)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), Failure> {
    use std::io::Write;
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn resolve_format(cli: Option<DataFormat>, config: &ScenarioConfig) -> OutputFormat {
    match cli {
        Some(DataFormat::Csv) => OutputFormat::Csv,
        Some(DataFormat::Json) => OutputFormat::Json,
        None => config.output.format,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Run {
            config,
            out,
            format,
        } => {
            let config = load_config(&config, cli.seed)?;
            let report = run_scenario(&config)?;
            let out = out.or_else(|| config.output.path.clone());
            emit(
                &write_report(&report, resolve_format(format, &config)),
                out.as_deref(),
            )
        }
        Cmd::Sweep {
            config,
            etas,
            out,
            format,
        } => {
            let config = load_config(&config, cli.seed)?;
            if !config.is_gnc() {
                return Err(Failure::Config("sweep requires a gnc model".into()));
            }
            let report = sweep_learning_rate(&config, &etas)?;
            emit(
                &write_report(&report, resolve_format(format, &config)),
                out.as_deref(),
            )
        }
        Cmd::Assess { profile, format } => {
            let text = std::fs::read_to_string(&profile)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", profile.display())))?;
            let profile = parse_profile(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let format = match format {
                TextFormat::Text => ReportFormat::Text,
                TextFormat::Json => ReportFormat::Json,
            };
            emit(&render_report(&assess(&profile), format), None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
