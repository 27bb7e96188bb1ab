use std::path::PathBuf;

use clap::{Args, Subcommand};

use clinsim_core::eval::{
    end_to_end_table, eval_end_to_end, eval_rubrics, eval_single_turn, rubric_table, single_turn_table,
    EndToEndConfig, EvalError,
};
use clinsim_core::io::{read_jsonl, write_jsonl};
use clinsim_core::Trajectory;

use crate::common::{
    backend, judge, load_synonyms, Cases, Classify, CmdResult, Common, Failure, Format, PolicyChoice, Run, SplitSel,
};

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Probe the policy on every oracle prefix of the reference trajectories.
    Single(PolicyEvalArgs),
    /// Full episodes against the world model.
    E2e(PolicyEvalArgs),
    /// Weighted rubric score of saved trajectories.
    Rubric(RubricArgs),
}

#[derive(Debug, Args)]
pub struct PolicyEvalArgs {
    /// Case-store directory.
    #[arg(long)]
    cases: PathBuf,
    /// `scripted`, `random`, or a checkpoint file.
    #[arg(long)]
    policy: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, value_enum, default_value = "eval")]
    split: SplitSel,
    /// Sample checkpoint policies instead of acting greedily.
    #[arg(long)]
    sample: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct RubricArgs {
    /// Case-store directory or cases.jsonl with rubrics.
    #[arg(long)]
    cases: PathBuf,
    /// trajectories.jsonl from `rollout` or `eval e2e`.
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[command(flatten)]
    common: Common,
}

pub fn run(cmd: EvalCmd) -> CmdResult {
    match cmd {
        EvalCmd::Single(a) => single(a),
        EvalCmd::E2e(a) => e2e(a),
        EvalCmd::Rubric(a) => rubric(a),
    }
}

fn classify(e: EvalError) -> Failure {
    match e {
        EvalError::Case { .. } => Failure::Validation(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn emit(run: &Run, format: Format, json: &str, table: &str) -> CmdResult {
    run.write_text("table.txt", table)?;
    match format {
        Format::Json => println!("{json}"),
        Format::Table => print!("{table}"),
    }
    Ok(())
}

fn single(a: PolicyEvalArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["eval", "single"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, a.split)?;
    let spec = cases.spec()?.clone();
    let policy = PolicyChoice::resolve(&mut run, &a.policy, &spec, a.sample)?;
    let table = load_synonyms(&run.cfg)?;
    let judge = judge(&run.cfg, &table)?;
    let report = eval_single_turn(
        |c| policy.make(c),
        &cases.cases,
        judge.as_ref(),
        run.cfg.seed,
        run.cfg.workers,
    )
    .map_err(classify)?;
    write_jsonl(&run.path("details.jsonl"), &report.rows).runtime()?;
    let mut summary = report.clone();
    summary.rows.clear();
    run.write_json("report.json", &summary)?;
    let json = serde_json::to_string_pretty(&summary).runtime()?;
    emit(&run, a.format, &json, &single_turn_table(&report))?;
    run.finish()
}

fn e2e(a: PolicyEvalArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["eval", "e2e"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, a.split)?;
    let spec = cases.spec()?.clone();
    let policy = PolicyChoice::resolve(&mut run, &a.policy, &spec, a.sample)?;
    let table = load_synonyms(&run.cfg)?;
    let judge = judge(&run.cfg, &table)?;
    let backend = backend(&run.cfg, &spec, &table)?;
    let cfg = EndToEndConfig {
        max_turns: run.cfg.episode.max_turns,
        seed: run.cfg.seed,
        averaging: run.cfg.eval.averaging,
        workers: run.cfg.workers,
    };
    let (report, trajectories) =
        eval_end_to_end(|c| policy.make(c), backend.as_ref(), &cases.cases, judge.as_ref(), &cfg)
            .map_err(classify)?;
    write_jsonl(&run.path("trajectories.jsonl"), &trajectories).runtime()?;
    write_jsonl(&run.path("details.jsonl"), &report.cases).runtime()?;
    let mut summary = report.clone();
    summary.cases.clear();
    run.write_json("report.json", &summary)?;
    let json = serde_json::to_string_pretty(&summary).runtime()?;
    emit(&run, a.format, &json, &end_to_end_table(&report))?;
    run.finish()
}

fn rubric(a: RubricArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["eval", "rubric"], &a.out)?;
    let cases = Cases::load(&mut run, &a.cases, SplitSel::All)?;
    run.input(&a.trajectories);
    let trajectories: Vec<Trajectory> = read_jsonl(&a.trajectories).invalid()?;
    let table = load_synonyms(&run.cfg)?;
    let report = eval_rubrics(&trajectories, &cases.cases, &table).map_err(classify)?;
    run.write_json("report.json", &report)?;
    let json = serde_json::to_string_pretty(&report).runtime()?;
    emit(&run, a.format, &json, &rubric_table(&report))?;
    run.finish()
}
