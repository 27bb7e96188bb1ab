use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};

use clinsim_core::policy::{PolicyLayout, PolicyParams};
use clinsim_core::trainer::{train_cold_start, train_grpo, GrpoContext, RunPaths, StartPoint, TrainError};

use crate::common::{backend, invalid, load_checkpoint, load_synonyms, Cases, CmdResult, Common, Failure, Run, SplitSel};

#[derive(Debug, Subcommand)]
pub enum TrainCmd {
    /// Supervised warm-up on reference trajectories.
    ColdStart(ColdStartArgs),
    /// Group-relative policy optimization against the world model.
    Grpo(GrpoArgs),
}

#[derive(Debug, Args)]
pub struct ColdStartArgs {
    /// Case-store directory; its train split is used.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct GrpoArgs {
    /// Case-store directory; its train split is used.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Starting checkpoint, typically a cold-start `final.json`. Zero
    /// weights when omitted.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Continue from the latest checkpoint in `<out>/checkpoints`.
    #[arg(long, conflicts_with = "init")]
    resume: bool,
    #[command(flatten)]
    common: Common,
}

pub fn run(cmd: TrainCmd) -> CmdResult {
    match cmd {
        TrainCmd::ColdStart(a) => cold_start(a),
        TrainCmd::Grpo(a) => grpo(a),
    }
}

fn classify(e: TrainError) -> Failure {
    match e {
        TrainError::Config(_) => Failure::Validation(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn cold_start(a: ColdStartArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["train", "cold-start"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, SplitSel::Train)?;
    let layout = PolicyLayout::from_spec(cases.spec()?, run.cfg.episode.max_turns);
    let init = PolicyParams::for_layout(&layout);
    let params = train_cold_start(&layout, &cases.cases, init, &run.cfg.cold_start, &RunPaths::new(&run.out))
        .map_err(classify)?;
    println!(
        "cold start: {} steps on {} cases, policy version {}",
        run.cfg.cold_start.steps,
        run.cfg.cold_start.n_cases.min(cases.cases.len()),
        params.version
    );
    run.finish()
}

/// Highest-step GRPO checkpoint in a run directory.
fn latest_checkpoint(paths: &RunPaths) -> CmdResult<Option<PathBuf>> {
    let dir = paths.checkpoints();
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return Ok(None);
    };
    let mut names: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    Ok(names.pop())
}

fn grpo(a: GrpoArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["train", "grpo"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, SplitSel::Train)?;
    let spec = cases.spec()?;
    let layout = Arc::new(PolicyLayout::from_spec(spec, run.cfg.episode.max_turns));
    let paths = RunPaths::new(&run.out);
    let start = if a.resume {
        let Some(path) = latest_checkpoint(&paths)? else {
            return invalid(format!("--resume: no checkpoints under {}", paths.checkpoints().display()));
        };
        log::info!("resuming from {}", path.display());
        StartPoint::resume(&load_checkpoint(&path, &layout)?).map_err(classify)?
    } else {
        match &a.init {
            Some(p) => {
                run.input(p);
                StartPoint::fresh(load_checkpoint(p, &layout)?.params)
            }
            None => StartPoint::fresh(PolicyParams::for_layout(&layout)),
        }
    };
    let table = load_synonyms(&run.cfg)?;
    let backend = backend(&run.cfg, spec, &table)?;
    // The KL anchor is the starting policy, which a resumed run finds in its
    // step-0 checkpoint.
    let reference = if run.cfg.trainer.kl_coef <= 0.0 {
        None
    } else if a.resume {
        Some(load_checkpoint(&paths.checkpoint(0), &layout)?.params)
    } else {
        Some(start.params.clone())
    };
    let ctx = GrpoContext {
        layout: layout.clone(),
        backend: backend.as_ref(),
        table: &table,
        reward: &run.cfg.reward,
        cfg: &run.cfg.trainer,
        reference: reference.as_ref(),
        workers: run.cfg.workers,
    };
    let params = train_grpo(&ctx, &cases.cases, start, &paths).map_err(classify)?;
    println!(
        "grpo: {} steps, policy version {}; final checkpoint {}",
        run.cfg.trainer.total_steps,
        params.version,
        paths.final_checkpoint().display()
    );
    run.finish()
}
