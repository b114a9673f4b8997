//! `ctrw-harmonic`: runs one experiment, writes its CSV files and a
//! `manifest.json` into the output directory.
//!
//! Exit status: 0 when every check passes, 1 on a numerical failure or a
//! failed check, 2 on a usage or configuration error.

mod config;
mod experiments;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, Experiment, Overrides};
use manifest::{unix_now, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ctrw_harmonic::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(path: &str, reason: &str) -> Self {
        CliError::Config {
            path: path.to_string(),
            reason: reason.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ctrw-harmonic",
    version,
    about = "Run ctrw-harmonic experiments"
)]
struct Cli {
    /// List the experiments and exit.
    #[arg(long)]
    list: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    FlSymbol(RunArgs),
    CtrwConverge(RunArgs),
    QFields(RunArgs),
    ResidualScan(RunArgs),
    LaplaceChecks(RunArgs),
    PmpProbe(RunArgs),
    Identities(RunArgs),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::FlSymbol(a) => (Experiment::FlSymbol, a),
            Command::CtrwConverge(a) => (Experiment::CtrwConverge, a),
            Command::QFields(a) => (Experiment::QFields, a),
            Command::ResidualScan(a) => (Experiment::ResidualScan, a),
            Command::LaplaceChecks(a) => (Experiment::LaplaceChecks, a),
            Command::PmpProbe(a) => (Experiment::PmpProbe, a),
            Command::Identities(a) => (Experiment::Identities, a),
        }
    }
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            ConfigFile::parse(&text)?
        }
        None => ConfigFile::default(),
    };
    let overrides = Overrides {
        output_dir: args.out.clone(),
        seed: args.seed,
    };
    file.resolve(experiment, &overrides)
}

fn run(experiment: Experiment, args: RunArgs) -> Result<bool, CliError> {
    let cfg = load(experiment, &args)?;
    let mut manifest = Manifest::new(&cfg, unix_now())?;
    let result = experiments::run(&cfg);
    let pass = match result {
        Ok(outcome) => {
            manifest.finish(outcome.outputs, outcome.checks, None);
            for c in &manifest.checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {} value={:e} bound={:e}",
                    c.name, c.value, c.bound
                );
            }
            manifest.write(&cfg.output_dir)?;
            manifest.pass
        }
        Err(e) => {
            manifest.finish(Vec::new(), Vec::new(), Some(e.to_string()));
            manifest.write(&cfg.output_dir)?;
            return Err(e);
        }
    };
    println!(
        "{} {}: {} checks, manifest in {}",
        if pass { "PASS" } else { "FAIL" },
        experiment.as_str(),
        manifest.checks.len(),
        cfg.output_dir.join(manifest::MANIFEST_FILE).display()
    );
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        for e in Experiment::ALL {
            println!("{:<16}{}", e.as_str(), e.summary());
        }
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no experiment given (try --list or --help)");
        return ExitCode::from(2);
    };
    let (experiment, args) = command.split();
    match run(experiment, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
