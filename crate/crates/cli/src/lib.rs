//! Command-line front end for `epdyn`: config loading, subcommands and the
//! verification suite.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::{CommandOutput, RunOptions};
use crate::config::{LoadedConfig, ParseError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INCOMPLETE: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
    pub const BLOW_UP: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config {file}: {source}")]
    Parse { file: String, source: ParseError },

    #[error(transparent)]
    Core(#[from] epdyn_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use epdyn_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => exit::CONFIG,
            CliError::Core(E::BlowUp { .. }) => exit::BLOW_UP,
            CliError::Core(
                E::Config(_) | E::Dimension { .. } | E::Partition(_) | E::StepSize { .. } | E::Stability { .. } | E::OracleScale { .. },
            ) => exit::CONFIG,
            CliError::Core(_) | CliError::Io { .. } => exit::FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "epdyn", version, about = "Effective-potential existence solver and realisation dynamics")]
pub struct Cli {
    /// Problem config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full spectrum of the existence operator.
    Spectrum,
    /// Roots of the reduced equation, checked against the full spectrum.
    EpRoots,
    /// Hop trajectory over the realisation ensemble.
    Hop,
    /// Time evolution of a wave field.
    Evolve,
    /// Run the verification suite.
    Verify {
        /// Restrict to one suite.
        #[arg(long)]
        suite: Option<String>,
        /// Override a tolerance, `name=value`. Repeatable.
        #[arg(long = "tolerance", value_name = "NAME=VALUE")]
        tolerances: Vec<String>,
    },
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    LoadedConfig::from_str(&text, base).map_err(|source| CliError::Parse { file: path.display().to_string(), source })
}

fn write_outputs(out: &Path, output: &CommandOutput) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    for (name, text) in &output.files {
        let path = out.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<CommandOutput, CliError> {
    let opts = RunOptions { seed: cli.seed };
    if let Command::Verify { suite, tolerances } = &cli.command {
        return verify::run(suite.as_deref(), tolerances, cli.seed.unwrap_or(verify::DEFAULT_SEED));
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = load_config(path)?;
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &opts),
        Command::EpRoots => commands::ep_roots(&cfg, &opts),
        Command::Hop => commands::hop(&cfg, &opts),
        Command::Evolve => commands::evolve(&cfg, &opts),
        Command::Verify { .. } => unreachable!(),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if cli.threads > 0 {
        // A second build in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = execute(&cli).and_then(|output| {
        write_outputs(&cli.out, &output)?;
        Ok(output)
    });
    match result {
        Ok(output) => {
            for line in &output.summary {
                println!("{line}");
            }
            output.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
