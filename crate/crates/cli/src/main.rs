//! `clinsim`: generate cohorts, train and roll out diagnostic policies, and
//! evaluate policies and world models.

mod cmd;
mod common;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmd::{cohort, eval, metrics, reward, rollout, train};

#[derive(Debug, Parser)]
#[command(name = "clinsim", version, about = "Closed-loop diagnostic-agent simulator")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic cohorts.
    #[command(subcommand)]
    Cohort(cohort::CohortCmd),
    /// Policy training.
    #[command(subcommand)]
    Train(train::TrainCmd),
    /// Run a policy (or the world model alone) over cases and save the output.
    Rollout(rollout::RolloutArgs),
    /// Policy evaluation protocols.
    #[command(subcommand)]
    Eval(eval::EvalCmd),
    /// World-model generation metrics.
    #[command(subcommand)]
    Metrics(metrics::MetricsCmd),
    /// Reward resources.
    #[command(subcommand)]
    Reward(reward::RewardCmd),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Cohort(c) => cohort::run(c),
        Command::Train(c) => train::run(c),
        Command::Rollout(a) => rollout::run(a),
        Command::Eval(c) => eval::run(c),
        Command::Metrics(c) => metrics::run(c),
        Command::Reward(c) => reward::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
