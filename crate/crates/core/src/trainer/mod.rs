//! Policy optimization: supervised cold start on reference trajectories and
//! group-relative policy optimization against the world model.

mod grpo;
mod imitation;
mod optim;
mod run;

pub use grpo::{group_advantages, grpo_step, GrpoContext, StepStats};
pub use imitation::{imitation_step, imitation_update, ImitationSet};
pub use optim::{OptimizerKind, OptimizerState};
pub use run::{train_cold_start, train_grpo, MetricsRow, RunPaths, StartPoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::IoError;
use crate::policy::{CheckpointError, PolicyError};
use crate::reward::RewardConfigError;
use crate::worldmodel::EpisodeError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("non-finite value during update: {0}")]
    Numerical(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Reward(#[from] RewardConfigError),
    #[error("every rollout group in step {0} failed")]
    AllGroupsFailed(u64),
}

/// Group-relative policy optimization settings. The defaults are the
/// desk-scale preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Rollouts per case.
    pub group_size: usize,
    /// Cases per step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub total_steps: u64,
    pub clip_ratio: f64,
    /// Added to the group standard deviation before dividing.
    pub eps_std: f64,
    pub entropy_coef: f64,
    /// Weight of the KL penalty toward the initial parameters.
    pub kl_coef: f64,
    /// Gradient passes over each batch of rollouts.
    pub update_epochs: usize,
    pub max_turns: usize,
    pub seed: u64,
    /// Checkpoint interval in steps (0 disables intermediate checkpoints).
    pub checkpoint_every: u64,
    /// Leading train cases withheld from sampling, e.g. a cold-start subset.
    pub skip_train_prefix: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl TrainerConfig {
    pub fn desk_scale() -> Self {
        Self {
            group_size: 5,
            batch_size: 32,
            learning_rate: 0.03,
            optimizer: OptimizerKind::Adam,
            total_steps: 150,
            clip_ratio: 0.2,
            eps_std: 1e-8,
            entropy_coef: 0.08,
            kl_coef: 0.0,
            update_epochs: 1,
            max_turns: 12,
            seed: 0,
            checkpoint_every: 50,
            skip_train_prefix: 0,
        }
    }

    /// Large-model settings, kept for reference. They assume a pretrained
    /// language-model policy and are far too slow for the linear policy.
    pub fn large_scale() -> Self {
        Self {
            batch_size: 512,
            learning_rate: 1e-6,
            total_steps: 200,
            entropy_coef: 0.0,
            ..Self::desk_scale()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_ratio.is_finite() && self.clip_ratio > 0.0) {
            return bad("clip_ratio must be positive");
        }
        if !(self.eps_std.is_finite() && self.eps_std > 0.0) {
            return bad("eps_std must be positive");
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be non-negative");
        }
        if !(self.kl_coef.is_finite() && self.kl_coef >= 0.0) {
            return bad("kl_coef must be non-negative");
        }
        if self.update_epochs == 0 {
            return bad("update_epochs must be positive");
        }
        if self.max_turns == 0 {
            return bad("max_turns must be positive");
        }
        Ok(())
    }
}

/// Supervised warm-up on reference trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartConfig {
    /// Number of leading train cases used.
    pub n_cases: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub max_turns: usize,
    pub seed: u64,
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        Self {
            n_cases: 24,
            steps: 10,
            learning_rate: 0.5,
            max_turns: 12,
            seed: 0,
        }
    }
}

impl ColdStartConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.n_cases == 0 {
            return Err(TrainError::Config("n_cases must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if self.max_turns == 0 {
            return Err(TrainError::Config("max_turns must be positive".into()));
        }
        Ok(())
    }
}

/// Plain gradient step `w += lr * g` with a finiteness check.
pub(crate) fn apply_gradient(
    weights: &mut [f64],
    grad: &[f64],
    lr: f64,
) -> Result<(), TrainError> {
    for (w, g) in weights.iter_mut().zip(grad) {
        *w += lr * g;
        if !w.is_finite() {
            return Err(TrainError::Numerical("weight became non-finite".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let d = TrainerConfig::desk_scale();
        assert_eq!((d.group_size, d.batch_size, d.learning_rate, d.total_steps), (5, 32, 0.03, 150));
        let p = TrainerConfig::large_scale();
        assert_eq!((p.group_size, p.batch_size, p.learning_rate, p.total_steps), (5, 512, 1e-6, 200));
        d.validate().unwrap();
        p.validate().unwrap();
        let mut bad = d.clone();
        bad.group_size = 1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = toml::from_str::<TrainerConfig>("group_size = 5\nbogus = 1\n");
        assert!(err.is_err());
        let ok: TrainerConfig = toml::from_str("learning_rate = 0.1\n").unwrap();
        assert_eq!(ok.learning_rate, 0.1);
        assert_eq!(ok.group_size, 5);
    }
}
