//! `bif`: generate data, train classifiers, fit and evaluate feature importance.

mod commands;
mod config;
mod data;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "bif",
    version,
    about = "Dirichlet feature importance experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its relevance masks as CSV.
    Gen(Common),
    /// Train the classifier to be explained.
    Train(Common),
    /// Fit global or local importance to the trained classifier.
    Explain(Common),
    /// Score the fitted importance: MCC and post-hoc accuracy.
    Eval(Common),
    /// Sweep gradient noise levels and compare the explanations.
    Tradeoff(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed for every stochastic stage; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite the outputs of an earlier run of the same command.
    #[arg(long)]
    force: bool,
    /// Worker threads for independent grid points.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Gen(c) => ("gen", c),
        Command::Train(c) => ("train", c),
        Command::Explain(c) => ("explain", c),
        Command::Eval(c) => ("eval", c),
        Command::Tradeoff(c) => ("tradeoff", c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| {
            CliError::Config(
                "at `out`: no output directory in the config or on the command line".into(),
            )
        })?;
    log::info!("{name}: config {}", cfg.hash());
    match cli.command {
        Command::Gen(c) => commands::gen(&cfg, &out, c.force),
        Command::Train(c) => commands::train(&cfg, &out, c.force),
        Command::Explain(c) => commands::explain(&cfg, &out, c.force),
        Command::Eval(c) => commands::eval(&cfg, &out, c.force),
        Command::Tradeoff(c) => commands::tradeoff(&cfg, &out, c.force, c.jobs.max(1)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIF_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.message() });
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
