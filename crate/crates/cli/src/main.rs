//! Batch front end for the mvlevy experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{CliError, Outcome, Output};
use config::ExperimentConfig;

/// Exit status when a run completes but one of its checks fails.
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(name = "mvlevy", version, about = "Particle, PDE and verification experiments for Lévy-driven McKean-Vlasov SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle system and export the marginal flow.
    Simulate(Common),
    /// Solve the fractional Fokker-Planck equation.
    Pde(Common),
    /// Estimate the propagation-of-chaos rate.
    ChaosRate(Common),
    /// Compare particle KDEs with the PDE density.
    Compare(Common),
    /// Characteristic-function battery for the stable sampler.
    ValidateSampler(Common),
    /// Check the hypotheses on the perturbation function k_ε.
    CheckH1(Common),
    /// Empirical-measure distance experiments.
    Metrics(Common),
    /// Weak-form adjoint identity between generator and PDE operator.
    Adjoint(Common),
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration (AC1..AC10).
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `out` from the configuration, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

type Runner = fn(&ExperimentConfig, &Output) -> Result<Outcome, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, runner, common): (&str, Runner, Common) = match cli.command {
        Command::Simulate(c) => ("simulate", commands::simulate, c),
        Command::Pde(c) => ("pde", commands::pde, c),
        Command::ChaosRate(c) => ("chaos-rate", commands::chaos_rate, c),
        Command::Compare(c) => ("compare", commands::compare, c),
        Command::ValidateSampler(c) => ("validate-sampler", commands::validate_sampler, c),
        Command::CheckH1(c) => ("check-h1", commands::check_h1, c),
        Command::Metrics(c) => ("metrics", commands::metrics, c),
        Command::Adjoint(c) => ("adjoint", commands::adjoint, c),
    };
    match run(name, runner, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{name}: one or more checks failed");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("{name} failed: {msg}");
            ExitCode::from(EXIT_RUN)
        }
    }
}

fn run(name: &str, runner: Runner, common: Common) -> Result<bool, CliError> {
    let mut cfg = config::load(common.config.as_deref(), common.preset.as_deref()).map_err(CliError::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let dir = common.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(dir.clone());
    let out = Output::create(&dir)?;
    out.json("config.resolved.json", &cfg)?;

    let start = Instant::now();
    let outcome = runner(&cfg, &out)?;
    out.json(
        "summary.json",
        &json!({
            "command": name,
            "seed": cfg.seed,
            "pass": outcome.pass,
            "config": cfg,
            "report": outcome.report,
        }),
    )?;
    eprintln!(
        "{name}: {} in {:.1}s, outputs in {}",
        if outcome.pass { "pass" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(outcome.pass)
}
