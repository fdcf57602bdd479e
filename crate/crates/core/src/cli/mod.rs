//! Configuration-driven front end: one run directory per invocation holding
//! `manifest.json` and the command's CSV / JSON artifacts.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Seeds};
pub use output::{Manifest, MANIFEST_NAME};
pub use run::{build_models, execute, replay, Models, OUTPUT_DIR_ENV};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Build,
    Ldos,
    Decay,
    Sweep,
    Borders,
    Diagnostic,
}

#[derive(Parser, Debug)]
#[command(
    name = "pidecay",
    version,
    about = "Parametric LDOS, fidelity decay and regime-border experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Subcommand, Debug)]
pub enum Action {
    /// Run one command against a TOML configuration.
    Run {
        #[arg(value_enum)]
        command: Command,
        config: PathBuf,
        /// Output directory (overrides the environment and the config).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List registered model families and decay laws.
    Strategies,
}

/// 2 for invalid input, 3 for numeric failures, 4 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) => 4,
        Error::NumericFailure { .. }
        | Error::OracleDivergence { .. }
        | Error::DegenerateDistribution(_)
        | Error::InsufficientWindow(_)
        | Error::InsufficientStatistics { .. } => 3,
        _ => 2,
    }
}

fn output_override(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.action {
        Action::Run {
            command,
            config,
            output,
        } => ExperimentConfig::load(&config)
            .and_then(|cfg| execute(&cfg, command, output_override(output).as_deref())),
        Action::Replay { manifest, output } => {
            replay(&manifest, output_override(output).as_deref())
        }
        Action::Strategies => {
            println!(
                "model families: {}",
                crate::registry::model_families().names().join(", ")
            );
            println!(
                "decay laws: {}",
                crate::registry::decay_laws().names().join(", ")
            );
            return 0;
        }
    };
    match result {
        Ok((dir, _)) => {
            println!("{}", dir.join(MANIFEST_NAME).display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
