//! Batch front end for the `quasisphere` library.
//!
//! A run is fully determined by a [`RunConfig`]; every command writes the
//! canonical config next to its outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

use std::path::Path;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qsx", version, about = "Quasi-spherical extensions of convex Bartnik data")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Override a config value, e.g. `--set solver.r_max=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (same as `--set output_dir=DIR`).
    #[arg(short, long, global = true)]
    pub output_dir: Option<std::path::PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Evolve u0 = H0 / H and estimate the total mass.
    Extend,
    /// Find the critical scaling mu0.
    Mu0,
    /// Test `certify.h_hat` for the non-existence of fill-ins.
    Certify,
    /// Run the property suite.
    Verify,
    /// Mass of t H0 / H over `sweep.t`.
    Sweep {
        /// Worker threads for independent entries.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

impl Cli {
    /// Loads the config with `-o` applied after `--set`.
    pub fn load_config(&self) -> Result<(RunConfig, std::path::PathBuf), CliError> {
        let mut overrides = self.overrides.clone();
        if let Some(dir) = &self.output_dir {
            let dir = serde_json::to_string(dir).map_err(CliError::from)?;
            overrides.push(format!("output_dir={dir}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

/// Runs one command and writes `config.json` beside its outputs.
pub fn execute(command: Command, config: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    commands::write_text(&config.output_dir, "config.json", &config.canonical_text())?;
    match command {
        Command::Extend => commands::extend(config, base),
        Command::Mu0 => commands::mu0(config, base),
        Command::Certify => commands::certify(config, base),
        Command::Verify => {
            let report = verify::run_suite(config)?;
            commands::write_json(&config.output_dir, "verify.json", &report)?;
            Ok(Outcome {
                exit_code: if report.passed { 0 } else { 1 },
                summary: serde_json::to_value(&report.checks)?,
            })
        }
        Command::Sweep { jobs } => commands::sweep(config, base, jobs),
    }
}
