use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use gridsync::{execute, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "gridsync", version, about = "Boundary-corrected climate event networks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, relative to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Detect extreme events per season.
    Events(Common),
    /// Build event-synchronization networks.
    Network(Common),
    /// Compute DC, CC, MGD and BC.
    Metrics(Common),
    /// Estimate p(distance) and surrogate ensemble means.
    Surrogate(Common),
    /// Apply subtraction and division corrections.
    Correct(Common),
    /// Compare the two corrections with paired t and K-S tests.
    Compare(Common),
    /// Generate synthetic inputs.
    Synth(Common),
    /// Run every stage in order.
    Pipeline(Common),
    /// Render maps of metric and corrected fields.
    Render(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, common) = match cli.command {
        Cmd::Events(c) => (Command::Events, c),
        Cmd::Network(c) => (Command::Network, c),
        Cmd::Metrics(c) => (Command::Metrics, c),
        Cmd::Surrogate(c) => (Command::Surrogate, c),
        Cmd::Correct(c) => (Command::Correct, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Synth(c) => (Command::Synth, c),
        Cmd::Pipeline(c) => (Command::Pipeline, c),
        Cmd::Render(c) => (Command::Render, c),
    };
    let result = RunConfig::load(&common.config).and_then(|mut cfg| {
        cfg.apply(&Overrides { seed: common.seed, threads: common.threads, out_dir: common.out });
        execute(cmd, &cfg)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
