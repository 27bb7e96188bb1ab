use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PolicyError, PolicyLayout, PolicyParams};
use crate::io::{read_json, write_json, IoError};
use crate::trainer::OptimizerState;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("unsupported checkpoint format version {0}")]
    Format(u32),
    #[error("checkpoint layout does not match the current vocabulary:\n  {}", .0.join("\n  "))]
    LayoutMismatch(Vec<String>),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Where a training run stood when the checkpoint was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub phase: String,
    pub step: u64,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Option<OptimizerState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub manifest_hash: String,
    pub layout: PolicyLayout,
    pub params: PolicyParams,
    #[serde(default)]
    pub training: Option<TrainingState>,
}

impl Checkpoint {
    pub fn new(layout: &PolicyLayout, params: PolicyParams, training: Option<TrainingState>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            manifest_hash: layout.manifest_hash(),
            layout: layout.clone(),
            params,
            training,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        Ok(write_json(path, self)?)
    }

    /// Loads a checkpoint without comparing it to any layout.
    pub fn load_unchecked(path: &Path) -> Result<Self, CheckpointError> {
        let mut ck: Checkpoint = read_json(path)?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(CheckpointError::Format(ck.format_version));
        }
        ck.layout.reindex()?;
        ck.params.check()?;
        if ck.params.n_actions != ck.layout.n_actions()
            || ck.params.n_features != ck.layout.n_features()
        {
            return Err(PolicyError::Dimension("parameters do not fit stored layout".into()).into());
        }
        Ok(ck)
    }

    /// Loads a checkpoint and refuses it unless its layout hash equals the
    /// hash of `expected`; the error lists the differences.
    pub fn load(path: &Path, expected: &PolicyLayout) -> Result<Self, CheckpointError> {
        let ck = Self::load_unchecked(path)?;
        if ck.manifest_hash != expected.manifest_hash() {
            let mut diff = ck.layout.diff(expected);
            if diff.is_empty() {
                diff.push("manifest hash differs".into());
            }
            return Err(CheckpointError::LayoutMismatch(diff));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::builtin_spec;

    #[test]
    fn round_trip_and_mismatch() {
        let spec = builtin_spec();
        let layout = PolicyLayout::from_spec(&spec, 12);
        let mut params = PolicyParams::for_layout(&layout);
        params.weights[3] = 0.125;
        params.version = 7;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = Checkpoint::new(
            &layout,
            params.clone(),
            Some(TrainingState { phase: "grpo".into(), step: 7, seed: 1, optimizer: None }),
        );
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path, &layout).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.training.unwrap().step, 7);

        let mut other = spec.clone();
        other.diseases.remove(0);
        let other_layout = PolicyLayout::from_spec(&other, 12);
        match Checkpoint::load(&path, &other_layout) {
            Err(CheckpointError::LayoutMismatch(d)) => {
                assert!(d.iter().any(|l| l.contains("only in checkpoint")), "{d:?}")
            }
            other => panic!("{other:?}"),
        }
    }
}
