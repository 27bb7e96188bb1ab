//! The examination world model contract, its backends, and the episode
//! engine that runs agent/environment loops.

mod episode;
mod remote;
mod synthetic;

pub use episode::{run_episode, run_episodes, EpisodeConfig, EpisodeError};
pub use remote::{
    parse_numeric_panel, remote_generate, render_prompt, PromptPayload, RemoteBackend,
    RemoteWorldModelConfig, ResultKind,
};
pub use synthetic::{SyntheticBackend, DEFAULT_AR_COEFFICIENT};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::remote::TransportError;
use crate::types::{ExamEvent, ExamResult, PatientProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldModelError {
    #[error("empty examination query")]
    EmptyQuery,
    #[error("unknown examination {0:?}")]
    UnknownExam(String),
    #[error("no generating parameters for case {0}")]
    UnknownDisease(String),
    #[error("retryable transport error: {0}")]
    Transport(#[from] TransportError),
    #[error("malformed result: {0}")]
    MalformedResult(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Capabilities {
    pub deterministic_given_seed: bool,
    /// `None` for open-vocabulary backends.
    pub supported_exams: Option<BTreeSet<String>>,
}

/// Generates the result of `query` for a patient given the examination
/// history so far. Implementations are shared across rollout workers.
pub trait WorldModelBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn generate(
        &self,
        profile: &PatientProfile,
        history: &[ExamEvent],
        query: &str,
        seed: u64,
    ) -> Result<ExamResult, WorldModelError>;
}

/// Free-function form of [`WorldModelBackend::generate`].
pub fn generate(
    backend: &dyn WorldModelBackend,
    profile: &PatientProfile,
    history: &[ExamEvent],
    query: &str,
    seed: u64,
) -> Result<ExamResult, WorldModelError> {
    backend.generate(profile, history, query, seed)
}
