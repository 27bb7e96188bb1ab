use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::Serialize;

use clinsim_core::cohort::{builtin_spec, generate_cohort, split_cases, CaseStore, CohortSpec, GenerateOptions};
use clinsim_core::io::read_json;
use clinsim_core::seed::derive_seed;

use crate::common::{Classify, CmdResult, Common, Run};

#[derive(Debug, Subcommand)]
pub enum CohortCmd {
    /// Generate a case store: cases.jsonl, splits.json and specs.json.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Cohort spec JSON; the built-in six-disease cohort when omitted.
    #[arg(long)]
    specs: Option<PathBuf>,
    /// Number of cases.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Serialize)]
struct Summary {
    n_cases: usize,
    n_train: usize,
    n_eval: usize,
    per_disease: std::collections::BTreeMap<String, usize>,
}

pub fn run(cmd: CohortCmd) -> CmdResult {
    match cmd {
        CohortCmd::Gen(a) => gen(a),
    }
}

fn gen(a: GenArgs) -> CmdResult {
    let mut run = Run::start(&a.common, &["cohort", "gen"], &a.out)?;
    let spec: CohortSpec = match &a.specs {
        Some(p) => {
            run.input(p);
            read_json(p).invalid()?
        }
        None => builtin_spec(),
    };
    let opts = GenerateOptions {
        routine_exams: run.cfg.cohort.routine_exams,
    };
    let seed = run.cfg.seed;
    let cases = generate_cohort(&spec, a.n, seed, &opts).invalid()?;
    let eval_f = run.cfg.cohort.eval_fraction;
    let fractions = (1.0 - eval_f, eval_f);
    let split = split_cases(&cases, fractions, derive_seed(seed, "split", 0)).invalid()?;
    let mut per_disease = std::collections::BTreeMap::new();
    for c in &cases {
        *per_disease.entry(c.disease_id().to_string()).or_insert(0) += 1;
    }
    let summary = Summary {
        n_cases: cases.len(),
        n_train: split.train.len(),
        n_eval: split.eval.len(),
        per_disease,
    };
    CaseStore::new(spec, cases, &split, seed, fractions)
        .write(&run.out)
        .runtime()?;
    run.write_json("summary.json", &summary)?;
    println!(
        "{} cases ({} train, {} eval) written to {}",
        summary.n_cases,
        summary.n_train,
        summary.n_eval,
        run.out.display()
    );
    run.finish()
}
