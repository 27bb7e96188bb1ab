use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;

use clinsim_core::cohort::{builtin_synonyms, CaseStore, CohortSpec};
use clinsim_core::distmetrics::{Embedder, HashedEmbedder, RemoteEmbedder};
use clinsim_core::io::{read_jsonl, sha256_file, write_json};
use clinsim_core::policy::{
    ActionVocabulary, Checkpoint, CheckpointError, Policy, PolicyLayout, ScriptedPolicy, SelectMode,
    SoftmaxPolicy, UniformRandomPolicy,
};
use clinsim_core::reward::{Judge, RemoteJudge, SynonymTable, TableJudge};
use clinsim_core::worldmodel::{RemoteBackend, SyntheticBackend, WorldModelBackend};
use clinsim_core::CaseRecord;

use crate::config::{BackendKind, EmbedderKind, JudgeKind, RunConfig};

/// Exit code 1: bad input or configuration. Exit code 2: failure while running.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub fn invalid<T>(msg: impl Into<String>) -> CmdResult<T> {
    Err(Failure::Validation(anyhow::anyhow!(msg.into())))
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed; every component seed derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for case-parallel stages.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitSel {
    Train,
    Eval,
    All,
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    seed: u64,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// An output directory together with the provenance it will record.
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    command: Vec<String>,
    inputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(common: &Common, command: &[&str], out: &Path) -> CmdResult<Self> {
        let mut cfg = RunConfig::load(common.config.as_deref()).invalid()?;
        cfg.resolve(common.seed, common.workers).invalid()?;
        std::fs::create_dir_all(out)
            .with_context(|| format!("creating {}", out.display()))
            .runtime()?;
        let mut run = Self {
            cfg,
            out: out.to_path_buf(),
            command: std::env::args().skip(1).collect(),
            inputs: Vec::new(),
        };
        if run.command.is_empty() {
            run.command = command.iter().map(|s| s.to_string()).collect();
        }
        if let Some(c) = &common.config {
            run.input(c);
        }
        if let Some(s) = run.cfg.synonyms.clone() {
            run.input(&s);
        }
        Ok(run)
    }

    /// Records an input file, or every file of an input directory.
    pub fn input(&mut self, path: &Path) {
        if path.is_dir() {
            self.inputs.extend(files_under(path));
        } else {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CmdResult {
        write_json(&self.path(name), value).runtime()
    }

    pub fn write_text(&self, name: &str, text: &str) -> CmdResult {
        let p = self.path(name);
        std::fs::write(&p, text)
            .with_context(|| format!("writing {}", p.display()))
            .runtime()
    }

    /// Writes `resolved_config.json` and `manifest.json` with hashes of all
    /// inputs and of every file now in the output directory.
    pub fn finish(self) -> CmdResult {
        write_json(&self.path("resolved_config.json"), &self.cfg).runtime()?;
        let hash = |paths: Vec<PathBuf>| -> CmdResult<Vec<FileHash>> {
            paths
                .into_iter()
                .map(|p| {
                    Ok(FileHash {
                        sha256: sha256_file(&p).runtime()?,
                        path: p.display().to_string(),
                    })
                })
                .collect()
        };
        let manifest_path = self.path("manifest.json");
        let outputs = files_under(&self.out)
            .into_iter()
            .filter(|p| *p != manifest_path)
            .collect();
        let manifest = Manifest {
            tool: "clinsim",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.clone(),
            seed: self.cfg.seed,
            inputs: hash(self.inputs.clone())?,
            outputs: hash(outputs)?,
        };
        write_json(&manifest_path, &manifest).runtime()
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&d) else { continue };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

pub fn load_synonyms(cfg: &RunConfig) -> CmdResult<SynonymTable> {
    match &cfg.synonyms {
        Some(p) => SynonymTable::from_path(p).invalid(),
        None => Ok(builtin_synonyms()),
    }
}

/// Cases from a case-store directory (with its cohort spec) or a bare
/// `cases.jsonl` file.
pub struct Cases {
    pub spec: Option<CohortSpec>,
    pub cases: Vec<CaseRecord>,
}

impl Cases {
    pub fn load(run: &mut Run, path: &Path, split: SplitSel) -> CmdResult<Self> {
        run.input(path);
        if path.is_dir() {
            let store = CaseStore::open(path).invalid()?;
            let cases = match split {
                SplitSel::Train => store.train_cases(),
                SplitSel::Eval => store.eval_cases(),
                SplitSel::All => store.cases.clone(),
            };
            return Ok(Self {
                spec: Some(store.spec),
                cases,
            });
        }
        let cases: Vec<CaseRecord> = read_jsonl(path).invalid()?;
        if split != SplitSel::All {
            log::info!("{} is a bare case file; using all cases", path.display());
        }
        Ok(Self { spec: None, cases })
    }

    pub fn spec(&self) -> CmdResult<&CohortSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| Failure::Validation(anyhow::anyhow!("this command needs a case-store directory with its cohort spec")))
    }
}

pub fn backend(cfg: &RunConfig, spec: &CohortSpec, table: &SynonymTable) -> CmdResult<Box<dyn WorldModelBackend>> {
    Ok(match cfg.episode.backend {
        BackendKind::Synthetic => Box::new(
            SyntheticBackend::new(Arc::new(spec.clone()))
                .with_synonyms(Arc::new(table.clone()))
                .with_ar_coefficient(cfg.episode.ar_coefficient),
        ),
        BackendKind::Remote => {
            Box::new(RemoteBackend::new(cfg.world_model_endpoint().invalid()?).with_spec(Arc::new(spec.clone())))
        }
    })
}

pub fn judge(cfg: &RunConfig, table: &SynonymTable) -> CmdResult<Box<dyn Judge>> {
    Ok(match cfg.eval.judge {
        JudgeKind::Table => Box::new(TableJudge::new(table.clone())),
        JudgeKind::Remote => Box::new(RemoteJudge::new(cfg.judge_endpoint().invalid()?)),
    })
}

pub fn embedder(cfg: &RunConfig) -> CmdResult<Box<dyn Embedder>> {
    Ok(match cfg.metrics.embedder {
        EmbedderKind::Hashed => Box::new(HashedEmbedder::new(cfg.metrics.embed_dim).invalid()?),
        EmbedderKind::Remote => Box::new(RemoteEmbedder {
            endpoint: cfg.embedder_endpoint().invalid()?,
            dim: cfg.metrics.embed_dim,
        }),
    })
}

pub fn load_checkpoint(path: &Path, layout: &PolicyLayout) -> CmdResult<Checkpoint> {
    match Checkpoint::load(path, layout) {
        Ok(ck) => Ok(ck),
        Err(e @ CheckpointError::LayoutMismatch(_)) => Err(Failure::Validation(
            anyhow::Error::new(e).context(format!("checkpoint {} does not fit this cohort", path.display())),
        )),
        Err(e) => Err(e).invalid(),
    }
}

/// `scripted` (reference follower), `random` (uniform), or a checkpoint
/// path for the softmax policy.
#[derive(Clone)]
pub enum PolicyChoice {
    Scripted,
    Random(Arc<ActionVocabulary>),
    Softmax(SoftmaxPolicy),
}

impl PolicyChoice {
    pub fn resolve(run: &mut Run, arg: &str, spec: &CohortSpec, sample: bool) -> CmdResult<Self> {
        match arg {
            "scripted" => Ok(Self::Scripted),
            "random" => Ok(Self::Random(Arc::new(ActionVocabulary::from_spec(spec)))),
            path => {
                let path = Path::new(path);
                if !path.is_file() {
                    return invalid(format!(
                        "--policy must be scripted, random, or a checkpoint file; {} not found",
                        path.display()
                    ));
                }
                run.input(path);
                let layout = PolicyLayout::from_spec(spec, run.cfg.episode.max_turns);
                let ck = load_checkpoint(path, &layout)?;
                let mode = if sample { SelectMode::Sample } else { SelectMode::Greedy };
                Ok(Self::Softmax(SoftmaxPolicy::new(Arc::new(layout), Arc::new(ck.params), mode)))
            }
        }
    }

    pub fn make(&self, case: &CaseRecord) -> Box<dyn Policy> {
        match self {
            Self::Scripted => Box::new(ScriptedPolicy::new(case)),
            Self::Random(v) => Box::new(UniformRandomPolicy::new(v.clone())),
            Self::Softmax(p) => Box::new(p.clone()),
        }
    }
}
