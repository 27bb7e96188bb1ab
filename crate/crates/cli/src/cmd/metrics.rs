use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Subcommand};

use clinsim_core::distmetrics::{exam_dist_report, exam_dist_table, ExamDistConfig, GeneratedExam, MetricError};
use clinsim_core::io::read_jsonl;

use crate::common::{embedder, invalid, Cases, Classify, CmdResult, Common, Failure, Run, SplitSel};

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Per-exam distribution metrics of generated results against the reference.
    ExamDist(ExamDistArgs),
}

#[derive(Debug, Args)]
pub struct ExamDistArgs {
    /// Directory holding generations.jsonl from `rollout --mode first-step`,
    /// or the file itself.
    #[arg(long)]
    gen: PathBuf,
    /// Case-store directory (or cases.jsonl) the generations were made from.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Report JSON path; the table and manifest go next to it.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    common: Common,
}

pub fn run(cmd: MetricsCmd) -> CmdResult {
    match cmd {
        MetricsCmd::ExamDist(a) => exam_dist(a),
    }
}

fn exam_dist(a: ExamDistArgs) -> CmdResult {
    let Some(name) = a.report.file_name().map(|n| n.to_string_lossy().into_owned()) else {
        return invalid(format!("--report {} is not a file path", a.report.display()));
    };
    let out = match a.report.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut run = Run::start(&a.common, &["metrics", "exam-dist"], &out)?;
    let gen_path = if a.gen.is_dir() { a.gen.join("generations.jsonl") } else { a.gen.clone() };
    run.input(&gen_path);
    let generated: Vec<GeneratedExam> = read_jsonl(&gen_path).invalid()?;
    if generated.is_empty() {
        return invalid(format!("{} holds no generations", gen_path.display()));
    }
    let ids: BTreeSet<&str> = generated.iter().map(|g| g.case_id.as_str()).collect();
    let mut cases = Cases::load(&mut run, &a.reference, SplitSel::All)?;
    cases.cases.retain(|c| ids.contains(c.case_id()));
    if cases.cases.is_empty() {
        return invalid("no reference case matches the generated case ids");
    }
    let embedder = embedder(&run.cfg)?;
    let cfg = ExamDistConfig {
        min_count: run.cfg.metrics.min_count,
        workers: run.cfg.workers,
    };
    let report = exam_dist_report(&generated, &cases.cases, embedder.as_ref(), &cfg).map_err(|e| match e {
        MetricError::Transport(_) => Failure::Runtime(e.into()),
        _ => Failure::Validation(e.into()),
    })?;
    run.write_json(&name, &report)?;
    let table = exam_dist_table(&report);
    run.write_text("exam_dist_table.txt", &table)?;
    print!("{table}");
    run.finish()
}
