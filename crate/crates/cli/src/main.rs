use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use doubly_scenery_cli::{run, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "doubly-scenery", version, about = "Random walk in doubly random scenery: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON or TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in preset, used when no config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Overrides `root_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write G_n samples to gn_samples.csv.
    Simulate,
    /// Compare CF shapes with the limit oracle (cf_report.json).
    VerifyCf,
    /// Self-similarity and Hurst exponent (scaling_report.json).
    VerifyScaling,
    /// Moment, CF and B_n diagnostics (conditions.json).
    CheckConditions,
    /// Monte Carlo against exact enumeration (oracle_report.json).
    OracleTest,
}

#[derive(ValueEnum, Clone, Copy)]
enum Preset {
    PaperDesk,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = match (&cli.config, cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(Preset::PaperDesk)) | (None, None) => ExperimentConfig::paper_desk(),
    };
    if let Some(seed) = cli.seed {
        cfg.root_seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.output_dir = Some(out.clone());
    cfg.validate()?;
    let experiment = match cli.command {
        Command::Simulate => Experiment::Simulate,
        Command::VerifyCf => Experiment::VerifyCf,
        Command::VerifyScaling => Experiment::VerifyScaling,
        Command::CheckConditions => Experiment::CheckConditions,
        Command::OracleTest => Experiment::OracleTest,
    };
    let passed = run(experiment, &cfg, &out)?;
    println!("{}", if passed { "verdict: PASS" } else { "verdict: FAIL" });
    Ok(passed)
}
