use std::path::PathBuf;

use anyhow::anyhow;
use clap::{Args, ValueEnum};

use clinsim_core::distmetrics::first_step_generations;
use clinsim_core::io::write_jsonl;
use clinsim_core::seed::derive_seed;
use clinsim_core::worldmodel::{run_episodes, EpisodeConfig, EpisodeError};

use crate::common::{backend, invalid, load_synonyms, Cases, Classify, CmdResult, Common, Failure, PolicyChoice, Run, SplitSel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Full agent episodes; writes trajectories.jsonl.
    Agent,
    /// World-model results for each reference exam on an empty history;
    /// writes generations.jsonl for `metrics exam-dist`.
    FirstStep,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Case-store directory.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "agent")]
    mode: Mode,
    /// `scripted`, `random`, or a checkpoint file. Required in agent mode.
    #[arg(long)]
    policy: Option<String>,
    /// Sample checkpoint policies instead of acting greedily.
    #[arg(long)]
    sample: bool,
    #[arg(long, value_enum, default_value = "eval")]
    split: SplitSel,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: RolloutArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["rollout"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, a.split)?;
    let spec = cases.spec()?.clone();
    let table = load_synonyms(&run.cfg)?;
    let backend = backend(&run.cfg, &spec, &table)?;
    let seed = run.cfg.seed;
    let workers = run.cfg.workers;
    match a.mode {
        Mode::FirstStep => {
            let gens = first_step_generations(backend.as_ref(), &cases.cases, seed, workers)
                .map_err(|(case, e)| Failure::Runtime(anyhow!("{case}: {e}")))?;
            write_jsonl(&run.path("generations.jsonl"), &gens).runtime()?;
            println!("{} generations from {} cases", gens.len(), cases.cases.len());
        }
        Mode::Agent => {
            let Some(arg) = a.policy.as_deref() else {
                return invalid("--policy is required in agent mode");
            };
            let policy = PolicyChoice::resolve(&mut run, arg, &spec, a.sample)?;
            let max_turns = run.cfg.episode.max_turns;
            let results = run_episodes(
                |c| policy.make(c),
                backend.as_ref(),
                &cases.cases,
                |_, c| EpisodeConfig {
                    max_turns,
                    seed: derive_seed(seed, c.case_id(), 0),
                },
                workers,
            );
            let mut trajectories = Vec::with_capacity(results.len());
            let mut protocol_errors = 0usize;
            for (case, r) in cases.cases.iter().zip(results) {
                match r {
                    Ok(t) => trajectories.push(t),
                    Err(EpisodeError::Protocol { partial, message, .. }) => {
                        log::warn!("{}: {message}", case.case_id());
                        protocol_errors += 1;
                        trajectories.push(*partial);
                    }
                    Err(e) => return Err(Failure::Runtime(anyhow!("{}: {e}", case.case_id()))),
                }
            }
            write_jsonl(&run.path("trajectories.jsonl"), &trajectories).runtime()?;
            let truncated = trajectories.iter().filter(|t| t.truncated).count();
            println!(
                "{} trajectories ({truncated} truncated, {protocol_errors} protocol errors)",
                trajectories.len()
            );
        }
    }
    run.finish()
}
