use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plumeseg::commands::{run_from_file, Command};
use plumeseg::config::Overrides;

#[derive(Parser)]
#[command(name = "plumeseg", version, about = "Smoke plume segmentation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic scenes, labels and a station panel.
    Synth(Common),
    /// Rasterize labels, cut crops and split them.
    Prepare(Common),
    /// Train the U-Net on the prepared crops.
    Train(Common),
    /// Segment scenes with a trained checkpoint.
    Predict(Common),
    /// Compare smoke sources by fixed-effects regression on PM2.5.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = ["1band", "3band", "4band"])]
    band_mode: Option<String>,
    #[arg(long, value_parser = ["bce", "mae"])]
    loss: Option<String>,
    #[arg(long, action = clap::ArgAction::Set)]
    drop_highest: Option<bool>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLUMESEG_LOG", "info")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Synth(a) => (Command::Synth, a),
        Cmd::Prepare(a) => (Command::Prepare, a),
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Predict(a) => (Command::Predict, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        threshold: args.threshold,
        band_mode: args.band_mode,
        loss: args.loss,
        drop_highest: args.drop_highest,
    };
    match run_from_file(cmd, &args.config, &overrides) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plumeseg {}: {e}", cmd.name());
            ExitCode::FAILURE
        }
    }
}
