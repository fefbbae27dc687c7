use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use smfg_core::runner::{self, Algo, Command, Overrides, Profile, RunConfig};

#[derive(Parser)]
#[command(name = "smfg", version, about = "Train and evaluate leader-follower tax policies on a simulated economy")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a learned algorithm and write its checkpoint.
    Train(Flags),
    /// Evaluate a policy over noise-free episodes.
    Evaluate(Flags),
    /// Evaluate with a wealth shock and write the per-step trace.
    Shock(Flags),
    /// Mix learned and cloned households in one economy.
    Mix(Flags),
    /// Train or evaluate every configured algorithm and seed.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// Configuration file; a previous run's manifest.txt also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of households.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algo>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    shock_step: Option<usize>,
    #[arg(long)]
    shock_factor: Option<f64>,
    #[arg(long)]
    mix_ratio: Option<f64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: smfg_core::Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: smfg_core::Error| e.to_string())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMFG_LOG_LEVEL", "info")).init();
    let cli = Cli::parse();
    let (command, f) = match cli.command {
        Cmd::Train(f) => (Command::Train, f),
        Cmd::Evaluate(f) => (Command::Evaluate, f),
        Cmd::Shock(f) => (Command::Shock, f),
        Cmd::Mix(f) => (Command::Mix, f),
        Cmd::Sweep(f) => (Command::Sweep, f),
    };
    let overrides = Overrides {
        seed: f.seed,
        households: f.n,
        epochs: f.epochs,
        algo: f.algo,
        checkpoint: f.checkpoint,
        shock_step: f.shock_step,
        shock_factor: f.shock_factor,
        mix_ratio: f.mix_ratio,
        eval_episodes: f.eval_episodes,
        profile: f.profile,
    };
    let rc = RunConfig::resolve(command, f.config.as_deref(), &f.out, &overrides).context("invalid configuration")?;
    let out = runner::run(&rc).with_context(|| format!("{} failed", command.name()))?;
    log::info!("wrote {} rows to {}", out.metrics.len(), out.out_dir.display());
    Ok(())
}
