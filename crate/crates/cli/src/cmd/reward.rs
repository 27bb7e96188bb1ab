use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand};
use serde::Serialize;

use clinsim_core::io::write_json;
use clinsim_core::reward::SynonymTable;

use crate::common::{Classify, CmdResult, Failure};

#[derive(Debug, Subcommand)]
pub enum RewardCmd {
    /// Check a synonym file for duplicate aliases, self-aliases and
    /// cross-namespace collisions.
    LintSynonyms(LintArgs),
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[arg(long)]
    synonyms: PathBuf,
    /// Also write the issue list as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LintReport<'a> {
    file: String,
    issues: &'a [String],
}

pub fn run(cmd: RewardCmd) -> CmdResult {
    match cmd {
        RewardCmd::LintSynonyms(a) => lint(a),
    }
}

fn lint(a: LintArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.synonyms)
        .with_context(|| format!("reading {}", a.synonyms.display()))
        .invalid()?;
    let issues = SynonymTable::lint(&text).invalid()?;
    if let Some(out) = &a.out {
        let report = LintReport {
            file: a.synonyms.display().to_string(),
            issues: &issues,
        };
        write_json(out, &report).runtime()?;
    }
    for i in &issues {
        println!("{i}");
    }
    if issues.is_empty() {
        println!("{}: ok", a.synonyms.display());
        Ok(())
    } else {
        Err(Failure::Validation(anyhow::anyhow!(
            "{} issue(s) in {}",
            issues.len(),
            a.synonyms.display()
        )))
    }
}
