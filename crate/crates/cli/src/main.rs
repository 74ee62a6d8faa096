//! `donorsim`: simulate optical pumping of donor hyperfine states.

mod config;
mod error;
mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use donorsim::units::EnergyUnit;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use config::{resolve, RunConfig, Sources};
use error::CliError;
use scenarios::{Artifact, Scenario};

pub const THREADS_ENV: &str = "DONORSIM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "donorsim", version, about = "Optical pumping of donor electron and nuclear spins")]
struct Cli {
    #[command(subcommand)]
    scenario: Scenario,

    /// JSON config file; without one the table1_calibrated preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set physics.W=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Energy unit of the output tables.
    #[arg(long, value_parser = parse_unit, global = true)]
    units: Option<EnergyUnit>,

    /// Output directory (overrides io.output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_unit(s: &str) -> Result<EnergyUnit, String> {
    s.parse().map_err(|e: donorsim::units::UnknownUnit| e.to_string())
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    bytes: usize,
    sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Serialize)]
struct RunRecord<'a> {
    version: &'static str,
    scenario: &'static str,
    config: &'a RunConfig,
    threads: usize,
    wall_time_s: f64,
    outputs: Vec<OutputDigest>,
    summary: Map<String, Value>,
    status: String,
    exit_code: u8,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::config(THREADS_ENV, format!("`{raw}` is not a thread count (0 = auto)")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(THREADS_ENV, e.to_string()))?;
    }
    Ok(())
}

fn write_file(dir: &Path, artifact: &Artifact) -> Result<OutputDigest, CliError> {
    let path = dir.join(&artifact.name);
    fs::write(&path, &artifact.bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(OutputDigest {
        file: artifact.name.clone(),
        bytes: artifact.bytes.len(),
        sha256: hex::encode(Sha256::digest(&artifact.bytes)),
    })
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = resolve(&Sources {
        file: cli.config.as_deref(),
        sets: &cli.set,
        units: cli.units,
        out: cli.out.as_deref(),
    })?;
    let started = Instant::now();
    let mut outcome = scenarios::run(cli.scenario, &cfg)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let dir = &cfg.io.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    outcome.artifacts.push(Artifact {
        name: "resolved_config.json".into(),
        bytes: (serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n").into_bytes(),
    });
    let outputs = outcome
        .artifacts
        .iter()
        .map(|a| write_file(dir, a))
        .collect::<Result<Vec<_>, _>>()?;
    let (status, exit_code) = match &outcome.failure {
        Some(e) => (e.to_string(), e.exit_code()),
        None => ("ok".to_string(), 0),
    };
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION"),
        scenario: cli.scenario.name(),
        config: &cfg,
        threads: rayon::current_num_threads(),
        wall_time_s,
        outputs,
        summary: outcome.summary,
        status,
        exit_code,
    };
    write_file(
        dir,
        &Artifact {
            name: "run_record.json".into(),
            bytes: (serde_json::to_string_pretty(&record).expect("record serializes") + "\n").into_bytes(),
        },
    )?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("donorsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
