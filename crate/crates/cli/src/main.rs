mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use botprof::pipeline::ModelVariant;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::RunConfig;
use crate::error::CliError;

/// Profile-routed social bot detection.
#[derive(Debug, Parser)]
#[command(name = "botprof", version)]
struct Cli {
    /// Directory that receives one sub-directory per run.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// key=value config file.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus and write a normalized copy with a class summary.
    Ingest,
    /// Generate a synthetic corpus and matching static vectors.
    Synth,
    /// Train the tweet embedder (vocabulary, biLM, layer mixing).
    TrainLm,
    /// Train a bot classifier and score it on the held-out split.
    Train {
        #[arg(value_parser = parse_variant)]
        variant: ModelVariant,
    },
    /// Score a trained model on the held-out split.
    Evaluate,
    /// Write per-tweet or per-account predictions for a whole corpus.
    Predict,
    /// Write true/false positive tweet samples for the held-out split.
    ExportErrors,
}

fn parse_variant(s: &str) -> Result<ModelVariant, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for s in &cli.set {
        cfg.apply_assignment(s)?;
    }
    let ctx = Ctx { cfg, out: cli.out };
    match cli.command {
        Command::Ingest => commands::ingest(&ctx),
        Command::Synth => commands::synth(&ctx),
        Command::TrainLm => commands::train_lm(&ctx),
        Command::Train { variant } => commands::train(&ctx, variant),
        Command::Evaluate => commands::evaluate_cmd(&ctx),
        Command::Predict => commands::predict(&ctx),
        Command::ExportErrors => commands::export_errors(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(dir) => {
            println!("run_dir={}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
