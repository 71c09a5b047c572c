use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

mod config;
mod report;
mod run;

use config::{ExperimentConfig, Subcommand};
use report::{emit_report, summary_json};
use run::{run_experiment, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    SpaceformTable,
    Measure,
    Check,
    VariationVerify,
    Perturb,
    Maximize,
    Lens,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::SpaceformTable => Subcommand::SpaceformTable,
            Command::Measure => Subcommand::Measure,
            Command::Check => Subcommand::Check,
            Command::VariationVerify => Subcommand::VariationVerify,
            Command::Perturb => Subcommand::Perturb,
            Command::Maximize => Subcommand::Maximize,
            Command::Lens => Subcommand::Lens,
        }
    }
}

/// Experiments on lambda-convex bodies in the model spaceforms.
///
/// Exit status: 0 when every asserted property holds, 1 on a property
/// failure (recorded in summary.json), 2 on a configuration or IO error.
#[derive(Debug, Parser)]
#[command(name = "lclab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("lclab: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::from_path(p) {
            Ok(c) => c,
            Err(e) => return config_error(e),
        },
        None => ExperimentConfig::default(),
    };
    if let Err(e) = cfg.apply_env(|k| std::env::var(k).ok()) {
        return config_error(e);
    }
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    let cfg = match cfg.resolve(cli.command.into()) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let outcome = match run_experiment(&cfg, cli.verbose) {
        Ok(o) => o,
        Err(RunError::Config(msg)) => return config_error(msg),
    };
    let dir = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "lclab-out".into()));
    if let Err(e) = emit_report(&dir, &cfg, &outcome) {
        return config_error(e);
    }
    if cli.verbose {
        eprint!("{}", summary_json(&cfg, &outcome));
    }
    let sub = cfg.subcommand.map_or("", |s| s.name());
    if outcome.pass() {
        println!("{sub}: pass ({})", dir.display());
        ExitCode::SUCCESS
    } else {
        for f in &outcome.failures {
            println!("{sub}: FAIL {}: {}", f.property, f.message);
        }
        ExitCode::from(1)
    }
}
