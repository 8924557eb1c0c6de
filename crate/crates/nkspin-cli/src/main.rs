//! `nkspin run <experiment>` and `nkspin replay <manifest>`.
//!
//! Exit codes: 0 success, 1 config or fixture error, 2 numeric failure
//! (artifacts are still written, with the failures in the manifest).

mod config;
mod experiments;
mod output;

use clap::{Args, Parser, Subcommand};
use nkspin::fixture::Fixture;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use thiserror::Error;

use config::{EchoVariant, Experiment, Overrides, RunConfig};
use output::{config_hash, output_root, sha256_hex, write_atomic, FileRecord, FixtureRecord, Manifest, Versions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("fixture missing: {0}")]
    FixtureMissing(String),
    #[error("io: {0}")]
    Io(String),
    #[error("experiment failed at {count} point(s); first: {first}")]
    ExperimentFailed { count: usize, first: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::FixtureMissing(_) => 1,
            Self::Io(_) | Self::ExperimentFailed { .. } => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "nkspin", version, about = "Spin dynamics experiments for non-Kramers ions under weak fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Re-run the config recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Output root (default: NKSPIN_OUT or ./nkspin-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    experiment: Experiment,
    /// TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `eu_yso` or a fixture file path.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    direction: Option<String>,
    /// Bias field(s) in mT, comma separated.
    #[arg(long = "B", value_delimiter = ',', allow_negative_numbers = true)]
    b: Option<Vec<f64>>,
    /// RF Rabi frequency Ω₀ in kHz.
    #[arg(long)]
    rabi: Option<f64>,
    /// RF detuning in kHz.
    #[arg(long, allow_negative_numbers = true)]
    detuning: Option<f64>,
    #[arg(long)]
    variant: Option<EchoVariant>,
    /// Output subdirectory name.
    #[arg(long)]
    name: Option<String>,
    /// Output root (default: NKSPIN_OUT or ./nkspin-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_fixture(which: &str) -> Result<(Fixture, FixtureRecord), CliError> {
    let (fx, source) = if which == "eu_yso" {
        (Fixture::eu_yso(), format!("builtin:eu_yso sha256:{}", sha256_hex(nkspin::fixture::EU_YSO.as_bytes())))
    } else {
        let path = Path::new(which);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::FixtureMissing(format!("{which}: {e}")))?;
        let fx = Fixture::parse(&text).map_err(|e| CliError::Config(format!("{which}: {e}")))?;
        (fx, format!("{which} sha256:{}", sha256_hex(text.as_bytes())))
    };
    let record = FixtureRecord { name: fx.name.clone(), version: fx.version, source };
    Ok((fx, record))
}

fn execute(config: RunConfig, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    config.validate()?;
    let (fx, fixture) = load_fixture(&config.fixture)?;
    let dir = output_root(out).join(config.output_name());
    let start = Instant::now();
    let outcome = experiments::run(&config, &fx)?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        let bytes = t.to_bytes();
        write_atomic(&dir.join(&t.file), &bytes)?;
        files.push(FileRecord { file: t.file.clone(), rows: t.len(), sha256: sha256_hex(&bytes) });
    }
    let manifest = Manifest {
        experiment: config.experiment.name().into(),
        config_hash: config_hash(&config),
        config,
        versions: Versions { nkspin: nkspin::VERSION.into(), nkspin_cli: env!("CARGO_PKG_VERSION").into() },
        fixture,
        files,
        diagnostics: outcome.diagnostics.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    match outcome.diagnostics.first() {
        None => Ok(dir),
        Some(first) => Err(CliError::ExperimentFailed { count: outcome.diagnostics.len(), first: first.clone() }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => {
            let config = match &a.config {
                Some(path) => RunConfig::load(path, a.experiment),
                None => Ok(RunConfig::new(a.experiment)),
            };
            config.and_then(|mut c| {
                c.apply(Overrides {
                    fixture: a.fixture,
                    direction: a.direction,
                    b: a.b,
                    rabi: a.rabi,
                    detuning: a.detuning,
                    variant: a.variant,
                    name: a.name,
                });
                execute(c, a.out)
            })
        }
        Command::Replay { manifest, out } => Manifest::load(&manifest).and_then(|m| execute(m.config, out)),
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
