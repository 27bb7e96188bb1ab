use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    grpo_step, imitation_step, ColdStartConfig, GrpoContext, ImitationSet, OptimizerState,
    TrainError,
};
use crate::io::{read_jsonl, IoError};
use crate::policy::{Checkpoint, PolicyLayout, PolicyParams, TrainingState};
use crate::seed::derive_seed;
use crate::types::CaseRecord;

/// One line of `metrics.jsonl`. Rollout statistics are absent for
/// supervised steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub mean_reward: Option<f64>,
    pub mean_f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub mean_turns: Option<f64>,
    pub nll: f64,
}

/// File layout of a training output directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.jsonl")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.dir.join("checkpoints")
    }

    pub fn checkpoint(&self, step: u64) -> PathBuf {
        self.checkpoints().join(format!("step_{step:06}.json"))
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("final.json")
    }
}

fn io_err(path: &Path, e: std::io::Error) -> TrainError {
    TrainError::Io(IoError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    /// Starts a fresh file, or keeps the rows up to `keep_through` of an
    /// existing one when resuming.
    fn open(path: PathBuf, keep_through: Option<u64>) -> Result<Self, TrainError> {
        let kept: Vec<MetricsRow> = match keep_through {
            Some(s) if path.exists() => read_jsonl::<MetricsRow>(&path)?
                .into_iter()
                .filter(|r| r.step <= s)
                .collect(),
            _ => Vec::new(),
        };
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
        };
        for r in &kept {
            w.push(r)?;
        }
        Ok(w)
    }

    fn push(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        let line = serde_json::to_string(row).expect("metrics serialize");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }
}

struct Saver<'a> {
    layout: &'a PolicyLayout,
    phase: &'a str,
    seed: u64,
}

impl Saver<'_> {
    fn save(
        &self,
        params: &PolicyParams,
        optimizer: Option<&OptimizerState>,
        step: u64,
        path: &Path,
    ) -> Result<(), TrainError> {
        let ck = Checkpoint::new(
            self.layout,
            params.clone(),
            Some(TrainingState {
                phase: self.phase.to_string(),
                step,
                seed: self.seed,
                optimizer: optimizer.cloned(),
            }),
        );
        ck.save(path)?;
        Ok(())
    }
}

fn prepare(paths: &RunPaths) -> Result<(), TrainError> {
    fs::create_dir_all(paths.checkpoints()).map_err(|e| io_err(&paths.checkpoints(), e))
}

/// Supervised warm-up on the first `cfg.n_cases` of `train`. Writes a
/// checkpoint before the first and after the last step.
pub fn train_cold_start(
    layout: &PolicyLayout,
    train: &[CaseRecord],
    init: PolicyParams,
    cfg: &ColdStartConfig,
    paths: &RunPaths,
) -> Result<PolicyParams, TrainError> {
    cfg.validate()?;
    prepare(paths)?;
    let subset = &train[..cfg.n_cases.min(train.len())];
    let set = ImitationSet::build(layout, subset)?;
    if set.skipped > 0 {
        log::warn!("{} reference steps fall outside the action vocabulary", set.skipped);
    }
    let saver = Saver {
        layout,
        phase: "cold_start",
        seed: cfg.seed,
    };
    let mut metrics = MetricsWriter::open(paths.metrics(), None)?;
    saver.save(&init, None, 0, &paths.checkpoint(0))?;
    let mut params = init;
    for step in 1..=cfg.steps {
        let (next, nll) = imitation_step(&params, &set, cfg.learning_rate)?;
        metrics.push(&MetricsRow {
            step,
            mean_reward: None,
            mean_f1: None,
            accuracy: None,
            mean_turns: None,
            nll,
        })?;
        params = next;
    }
    if cfg.steps > 0 {
        saver.save(&params, None, cfg.steps, &paths.checkpoint(cfg.steps))?;
    }
    saver.save(&params, None, cfg.steps, &paths.final_checkpoint())?;
    Ok(params)
}

fn sample_batch(pool: &[CaseRecord], batch: usize, seed: u64, step: u64) -> Vec<CaseRecord> {
    if batch >= pool.len() {
        return pool.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "batch", step));
    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), batch).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

/// Where a GRPO run begins: fresh parameters at step 0, or a checkpoint's
/// parameters and optimizer state at its step.
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub params: PolicyParams,
    pub optimizer: Option<OptimizerState>,
    pub step: u64,
}

impl StartPoint {
    pub fn fresh(params: PolicyParams) -> Self {
        Self {
            params,
            optimizer: None,
            step: 0,
        }
    }

    /// Resumes from a checkpoint written by [`train_grpo`].
    pub fn resume(ck: &Checkpoint) -> Result<Self, TrainError> {
        let state = ck
            .training
            .as_ref()
            .filter(|t| t.phase == "grpo")
            .ok_or_else(|| TrainError::Config("checkpoint carries no GRPO training state".into()))?;
        Ok(Self {
            params: ck.params.clone(),
            optimizer: state.optimizer.clone(),
            step: state.step,
        })
    }
}

/// Runs optimization steps `start.step + 1 ..= total_steps`. Every step's
/// batch and rollouts derive from `(seed, step)` alone and optimizer state
/// travels with checkpoints, so a resumed run reproduces an uninterrupted
/// one exactly.
pub fn train_grpo(
    ctx: &GrpoContext<'_>,
    train: &[CaseRecord],
    start: StartPoint,
    paths: &RunPaths,
) -> Result<PolicyParams, TrainError> {
    let cfg = ctx.cfg;
    cfg.validate()?;
    ctx.reward.validate()?;
    prepare(paths)?;
    let pool = &train[cfg.skip_train_prefix.min(train.len())..];
    if pool.is_empty() && cfg.total_steps > start.step {
        return Err(TrainError::Config("no training cases".into()));
    }
    let saver = Saver {
        layout: &ctx.layout,
        phase: "grpo",
        seed: cfg.seed,
    };
    let resuming = start.step > 0;
    let mut params = start.params;
    let mut optimizer = match start.optimizer {
        Some(o) if o.kind == cfg.optimizer => o,
        Some(_) => return Err(TrainError::Config("checkpoint optimizer differs from config".into())),
        None if resuming && cfg.optimizer != super::OptimizerKind::Sgd => {
            return Err(TrainError::Config("checkpoint lacks optimizer state".into()))
        }
        None => OptimizerState::new(cfg.optimizer, params.weights.len()),
    };
    let mut metrics = MetricsWriter::open(paths.metrics(), resuming.then_some(start.step))?;
    if !resuming {
        saver.save(&params, Some(&optimizer), 0, &paths.checkpoint(0))?;
    }
    for step in start.step + 1..=cfg.total_steps {
        let batch = sample_batch(pool, cfg.batch_size, cfg.seed, step);
        let (next, stats) = grpo_step(ctx, &params, &mut optimizer, &batch, step)?;
        log::info!(
            "step {step}: reward {:.4} f1 {:.4} acc {:.4} turns {:.2}",
            stats.mean_reward,
            stats.mean_f1,
            stats.accuracy,
            stats.mean_turns
        );
        metrics.push(&MetricsRow {
            step,
            mean_reward: Some(stats.mean_reward),
            mean_f1: Some(stats.mean_f1),
            accuracy: Some(stats.accuracy),
            mean_turns: Some(stats.mean_turns),
            nll: stats.nll,
        })?;
        params = next;
        let periodic = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0;
        if periodic || step == cfg.total_steps {
            saver.save(&params, Some(&optimizer), step, &paths.checkpoint(step))?;
        }
    }
    let last = cfg.total_steps.max(start.step);
    saver.save(&params, Some(&optimizer), last, &paths.final_checkpoint())?;
    Ok(params)
}
