use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionConstraint, ActionVocabulary, Policy, PolicyError};
use crate::types::{AgentAction, CaseRecord, EpisodeState};

/// Replays a case's reference trajectory: the reference exams in order,
/// then the reference diagnosis.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    exams: Vec<String>,
    diagnosis: AgentAction,
}

impl ScriptedPolicy {
    pub fn new(case: &CaseRecord) -> Self {
        let r = &case.reference_trajectory;
        Self {
            exams: r.exams.iter().map(|e| e.exam_name.clone()).collect(),
            diagnosis: AgentAction::diagnose(r.final_diagnosis.clone()),
        }
    }
}

impl Policy for ScriptedPolicy {
    fn act(
        &mut self,
        state: &EpisodeState,
        _seed: u64,
        constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError> {
        let next = self.exams.get(state.turn);
        match (constraint, next) {
            (ActionConstraint::DiagnoseOnly, _) | (ActionConstraint::Any, None) => {
                Ok(self.diagnosis.clone())
            }
            (_, Some(exam)) => Ok(AgentAction::query(exam.clone())),
            (ActionConstraint::ExamOnly, None) => self
                .exams
                .last()
                .map(|e| AgentAction::query(e.clone()))
                .ok_or_else(|| PolicyError::NoAction("reference has no exams".into())),
        }
    }
}

/// Uniform over the admissible vocabulary actions.
#[derive(Debug, Clone)]
pub struct UniformRandomPolicy {
    vocab: Arc<ActionVocabulary>,
}

impl UniformRandomPolicy {
    pub fn new(vocab: Arc<ActionVocabulary>) -> Self {
        Self { vocab }
    }
}

impl Policy for UniformRandomPolicy {
    fn act(
        &mut self,
        _state: &EpisodeState,
        seed: u64,
        constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError> {
        let allowed: Vec<usize> = (0..self.vocab.len())
            .filter(|&i| constraint.allows(self.vocab.is_diagnose(i)))
            .collect();
        if allowed.is_empty() {
            return Err(PolicyError::NoAction("empty vocabulary".into()));
        }
        let k = ChaCha8Rng::seed_from_u64(seed).random_range(0..allowed.len());
        Ok(self.vocab.action(allowed[k]))
    }
}

/// Emits the same action on every call, whatever the constraint.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub AgentAction);

impl Policy for ConstantPolicy {
    fn act(
        &mut self,
        _state: &EpisodeState,
        _seed: u64,
        _constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError> {
        Ok(self.0.clone())
    }
}
