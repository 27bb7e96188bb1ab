//! Diagnostic agents: the policy interface, a linear softmax policy over a
//! fixed action vocabulary, and baseline policies.

mod baselines;
mod checkpoint;
mod features;
mod softmax;

pub use baselines::{ConstantPolicy, ScriptedPolicy, UniformRandomPolicy};
pub use checkpoint::{Checkpoint, CheckpointError, TrainingState, CHECKPOINT_FORMAT_VERSION};
pub use features::{FeatureLayout, SubeventFeature, Z_CLIP};
pub use softmax::{
    action_distribution, masked_distribution, select_action, select_index, PolicyParams,
    SelectMode, SoftmaxPolicy,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::CohortSpec;
use crate::io::sha256_hex;
use crate::types::{normalize_term, AgentAction, DiagnosisLabel, EpisodeState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("non-finite logit for action {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no admissible action: {0}")]
    NoAction(String),
}

/// Restricts which action family a policy may emit on a given call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionConstraint {
    Any,
    ExamOnly,
    DiagnoseOnly,
}

impl ActionConstraint {
    pub fn allows(self, diagnose: bool) -> bool {
        match self {
            ActionConstraint::Any => true,
            ActionConstraint::ExamOnly => !diagnose,
            ActionConstraint::DiagnoseOnly => diagnose,
        }
    }
}

/// Maps a state to the next action. `seed` is the only source of
/// randomness an implementation may use.
pub trait Policy {
    fn act(
        &mut self,
        state: &EpisodeState,
        seed: u64,
        constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(
        &mut self,
        state: &EpisodeState,
        seed: u64,
        constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError> {
        (**self).act(state, seed, constraint)
    }
}

/// Fixed action set: one query action per cohort exam (sorted) followed by
/// one diagnose action per cohort disease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVocabulary {
    pub exams: Vec<String>,
    pub diagnoses: Vec<DiagnosisLabel>,
    #[serde(skip)]
    exam_index: HashMap<String, usize>,
    #[serde(skip)]
    diagnosis_index: HashMap<String, usize>,
}

impl ActionVocabulary {
    pub fn new(exams: Vec<String>, diagnoses: Vec<DiagnosisLabel>) -> Result<Self, PolicyError> {
        let exams: Vec<String> = exams.iter().map(|e| normalize_term(e)).collect();
        let mut v = Self {
            exams,
            diagnoses,
            exam_index: HashMap::new(),
            diagnosis_index: HashMap::new(),
        };
        v.reindex()?;
        Ok(v)
    }

    pub fn from_spec(spec: &CohortSpec) -> Self {
        Self::new(spec.exam_names(), spec.diagnosis_labels())
            .expect("validated cohort spec yields a unique vocabulary")
    }

    fn reindex(&mut self) -> Result<(), PolicyError> {
        self.exam_index.clear();
        self.diagnosis_index.clear();
        for (i, e) in self.exams.iter().enumerate() {
            if e.is_empty() || self.exam_index.insert(e.clone(), i).is_some() {
                return Err(PolicyError::Dimension(format!("duplicate or empty exam {e:?}")));
            }
        }
        for (i, d) in self.diagnoses.iter().enumerate() {
            if d.is_empty() || self.diagnosis_index.insert(d.canonical.clone(), i).is_some() {
                return Err(PolicyError::Dimension(format!(
                    "duplicate or empty diagnosis {:?}",
                    d.raw
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.exams.len() + self.diagnoses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_exams(&self) -> usize {
        self.exams.len()
    }

    pub fn is_diagnose(&self, index: usize) -> bool {
        index >= self.exams.len()
    }

    pub fn action(&self, index: usize) -> AgentAction {
        if index < self.exams.len() {
            AgentAction::query(self.exams[index].clone())
        } else {
            AgentAction::diagnose(self.diagnoses[index - self.exams.len()].clone())
        }
    }

    pub fn exam_index(&self, exam: &str) -> Option<usize> {
        self.exam_index.get(&normalize_term(exam)).copied()
    }

    /// Index of an action, or `None` when it lies outside the vocabulary.
    pub fn index_of(&self, action: &AgentAction) -> Option<usize> {
        match action {
            AgentAction::QueryExam { exam_name } => self.exam_index(exam_name),
            AgentAction::Diagnose { diagnosis } => self
                .diagnosis_index
                .get(&normalize_term(&diagnosis.raw))
                .or_else(|| self.diagnosis_index.get(&diagnosis.canonical))
                .map(|i| i + self.exams.len()),
        }
    }
}

/// Everything that fixes the shape and meaning of policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyLayout {
    pub vocab: ActionVocabulary,
    pub features: FeatureLayout,
}

impl PolicyLayout {
    pub fn from_spec(spec: &CohortSpec, max_turns: usize) -> Self {
        let vocab = ActionVocabulary::from_spec(spec);
        let features = FeatureLayout::from_spec(spec, &vocab, max_turns);
        Self { vocab, features }
    }

    /// Rebuilds lookup tables after deserialization.
    pub fn reindex(&mut self) -> Result<(), PolicyError> {
        self.vocab.reindex()?;
        self.features.reindex();
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.dim()
    }

    /// Hex SHA-256 of the serialized layout. Checkpoints record it so that
    /// parameters are never loaded against a different action or feature set.
    pub fn manifest_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("layout serializes"))
    }

    /// Human-readable differences between two layouts.
    pub fn diff(&self, other: &PolicyLayout) -> Vec<String> {
        let mut out = Vec::new();
        set_diff(&mut out, "exam action", &self.vocab.exams, &other.vocab.exams);
        let a: Vec<String> = self.vocab.diagnoses.iter().map(|d| d.canonical.clone()).collect();
        let b: Vec<String> = other.vocab.diagnoses.iter().map(|d| d.canonical.clone()).collect();
        set_diff(&mut out, "diagnosis action", &a, &b);
        let sa: Vec<String> = self.features.subevents.iter().map(|s| s.key()).collect();
        let sb: Vec<String> = other.features.subevents.iter().map(|s| s.key()).collect();
        set_diff(&mut out, "subevent feature", &sa, &sb);
        set_diff(&mut out, "finding feature", &self.features.findings, &other.features.findings);
        if self.features.max_turns != other.features.max_turns {
            out.push(format!(
                "max_turns {} vs {}",
                self.features.max_turns, other.features.max_turns
            ));
        }
        if out.is_empty() && self != other {
            out.push("feature normalization constants differ".into());
        }
        out
    }
}

fn set_diff(out: &mut Vec<String>, what: &str, a: &[String], b: &[String]) {
    let before = out.len();
    for x in a.iter().filter(|x| !b.contains(x)) {
        out.push(format!("{what} {x:?} only in checkpoint"));
    }
    for x in b.iter().filter(|x| !a.contains(x)) {
        out.push(format!("{what} {x:?} only in current layout"));
    }
    if out.len() == before && a != b {
        out.push(format!("{what} order differs"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::builtin_spec;

    #[test]
    fn vocabulary_layout() {
        let spec = builtin_spec();
        let v = ActionVocabulary::from_spec(&spec);
        assert_eq!(v.n_exams(), spec.exam_names().len());
        assert_eq!(v.len(), v.n_exams() + spec.diseases.len());
        let mut sorted = v.exams.clone();
        sorted.sort();
        assert_eq!(sorted, v.exams);
        for i in 0..v.len() {
            assert_eq!(v.index_of(&v.action(i)), Some(i));
            assert_eq!(v.is_diagnose(i), i >= v.n_exams());
        }
        assert_eq!(v.index_of(&AgentAction::query("Lipase")), v.exam_index("lipase"));
        assert_eq!(v.index_of(&AgentAction::query("bone scan")), None);
    }

    #[test]
    fn duplicate_actions_rejected() {
        let err = ActionVocabulary::new(
            vec!["Lipase".into(), "lipase".into()],
            vec![DiagnosisLabel::new("x")],
        );
        assert!(err.is_err());
    }

    #[test]
    fn manifest_hash_tracks_layout() {
        let spec = builtin_spec();
        let a = PolicyLayout::from_spec(&spec, 12);
        let b = PolicyLayout::from_spec(&spec, 12);
        assert_eq!(a.manifest_hash(), b.manifest_hash());
        let mut smaller = spec.clone();
        smaller.diseases.pop();
        let c = PolicyLayout::from_spec(&smaller, 12);
        assert_ne!(a.manifest_hash(), c.manifest_hash());
        assert!(a.diff(&c).iter().any(|d| d.contains("diagnosis action")));
        let d = PolicyLayout::from_spec(&spec, 8);
        assert_ne!(a.manifest_hash(), d.manifest_hash());
    }
}
