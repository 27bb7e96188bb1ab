use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{WorldModelBackend, WorldModelError};
use crate::policy::{ActionConstraint, Policy, PolicyError};
use crate::seed::derive_seed;
use crate::types::{
    AgentAction, CaseRecord, ContractError, EpisodeState, ExamEvent, ExamResult, Trajectory,
    TrajectoryStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_turns: usize,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_turns: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    /// The policy emitted a malformed action. `partial` holds the steps so
    /// far, marked truncated.
    #[error("protocol error at turn {turn}: {message}")]
    Protocol {
        turn: usize,
        message: String,
        partial: Box<Trajectory>,
    },
    #[error("world model: {0}")]
    Backend(WorldModelError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("contract: {0}")]
    Contract(#[from] ContractError),
}

fn partial(case: &CaseRecord, steps: Vec<TrajectoryStep>, seed: u64) -> Box<Trajectory> {
    Box::new(Trajectory {
        case_id: case.case_id().to_string(),
        turns_used: steps.len(),
        steps,
        final_diagnosis: None,
        truncated: true,
        seed,
    })
}

/// Runs one episode. Turn `t` consults the policy with seed
/// `derive_seed(seed, "policy", t)` and the backend with
/// `derive_seed(seed, "env", t)`. Unknown exams yield the no-result text.
/// Without a diagnosis after `max_turns` turns the trajectory is truncated.
pub fn run_episode(
    policy: &mut dyn Policy,
    backend: &dyn WorldModelBackend,
    case: &CaseRecord,
    cfg: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError> {
    let mut state = EpisodeState::initial(case.inquiry.clone());
    let mut steps = Vec::new();
    for t in 1..=cfg.max_turns {
        let t64 = t as u64;
        let action = policy.act(&state, derive_seed(cfg.seed, "policy", t64), ActionConstraint::Any)?;
        if let Err(e) = action.validate() {
            return Err(EpisodeError::Protocol {
                turn: t,
                message: e.to_string(),
                partial: partial(case, steps, cfg.seed),
            });
        }
        let state_digest = state.digest();
        match &action {
            AgentAction::Diagnose { diagnosis } => {
                let final_diagnosis = Some(diagnosis.clone());
                steps.push(TrajectoryStep {
                    state_digest,
                    action,
                    result: None,
                });
                return Ok(Trajectory {
                    case_id: case.case_id().to_string(),
                    steps,
                    final_diagnosis,
                    turns_used: t,
                    truncated: false,
                    seed: cfg.seed,
                });
            }
            AgentAction::QueryExam { exam_name } => {
                let result = match backend.generate(
                    &case.profile,
                    &state.history,
                    exam_name,
                    derive_seed(cfg.seed, "env", t64),
                ) {
                    Ok(r) => r,
                    Err(WorldModelError::UnknownExam(_)) => ExamResult::no_result(),
                    Err(e) => return Err(EpisodeError::Backend(e)),
                };
                if let Err(e) = result.validate() {
                    return Err(EpisodeError::Backend(WorldModelError::MalformedResult(
                        e.to_string(),
                    )));
                }
                state = state.append(ExamEvent::new(exam_name, result.clone(), t)?)?;
                steps.push(TrajectoryStep {
                    state_digest,
                    action,
                    result: Some(result),
                });
            }
        }
    }
    Ok(Trajectory {
        case_id: case.case_id().to_string(),
        steps,
        final_diagnosis: None,
        turns_used: cfg.max_turns,
        truncated: true,
        seed: cfg.seed,
    })
}

/// Runs one episode per case on a pool of `workers` threads. Output order
/// follows `cases`, and each episode depends only on its own inputs, so
/// results do not change with the worker count.
pub fn run_episodes<P, F>(
    make_policy: F,
    backend: &dyn WorldModelBackend,
    cases: &[CaseRecord],
    cfg_for: impl Fn(usize, &CaseRecord) -> EpisodeConfig + Sync,
    workers: usize,
) -> Vec<Result<Trajectory, EpisodeError>>
where
    P: Policy,
    F: Fn(&CaseRecord) -> P + Sync,
{
    crate::parallel::map_indexed(workers, cases.len(), |i| {
        let case = &cases[i];
        let mut policy = make_policy(case);
        run_episode(&mut policy, backend, case, &cfg_for(i, case))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::cohort::{builtin_spec, generate_cohort, GenerateOptions};
    use crate::policy::{ConstantPolicy, ScriptedPolicy};
    use crate::types::DiagnosisLabel;
    use crate::worldmodel::SyntheticBackend;

    fn setup() -> (SyntheticBackend, Vec<CaseRecord>) {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, 8, 11, &GenerateOptions::default()).unwrap();
        (SyntheticBackend::new(Arc::new(spec)), cases)
    }

    #[test]
    fn scripted_policy_replays_reference() {
        let (b, cases) = setup();
        for case in &cases {
            let mut p = ScriptedPolicy::new(case);
            let t = run_episode(&mut p, &b, case, &EpisodeConfig { max_turns: 12, seed: 3 }).unwrap();
            let n = case.reference_trajectory.exams.len();
            assert_eq!(t.turns_used, n + 1);
            assert!(!t.truncated);
            assert_eq!(t.queried_exams(), case.reference_trajectory.exam_names());
            assert_eq!(t.final_diagnosis.as_ref(), Some(&case.reference_trajectory.final_diagnosis));
            t.validate(12).unwrap();
        }
    }

    #[test]
    fn immediate_diagnosis_uses_one_turn() {
        let (b, cases) = setup();
        let mut p = ConstantPolicy(AgentAction::diagnose(DiagnosisLabel::new("x")));
        let t = run_episode(&mut p, &b, &cases[0], &EpisodeConfig::default()).unwrap();
        assert_eq!(t.turns_used, 1);
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn never_diagnosing_truncates() {
        let (b, cases) = setup();
        let mut p = ConstantPolicy(AgentAction::query("lipase"));
        let t = run_episode(&mut p, &b, &cases[0], &EpisodeConfig { max_turns: 5, seed: 0 }).unwrap();
        assert!(t.truncated);
        assert_eq!(t.turns_used, 5);
        assert_eq!(t.steps.len(), 5);
        assert!(t.final_diagnosis.is_none());
        t.validate(5).unwrap();
    }

    #[test]
    fn unknown_exam_returns_no_result() {
        let (b, cases) = setup();
        let mut p = ConstantPolicy(AgentAction::query("bone marrow biopsy"));
        let t = run_episode(&mut p, &b, &cases[0], &EpisodeConfig { max_turns: 2, seed: 0 }).unwrap();
        assert!(t.steps.iter().all(|s| s.result.as_ref().unwrap().is_no_result()));
    }

    #[test]
    fn malformed_action_is_protocol_error() {
        let (b, cases) = setup();
        let mut p = ConstantPolicy(AgentAction::QueryExam {
            exam_name: "  ".into(),
        });
        match run_episode(&mut p, &b, &cases[0], &EpisodeConfig::default()) {
            Err(EpisodeError::Protocol { turn, partial, .. }) => {
                assert_eq!(turn, 1);
                assert!(partial.truncated);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rollouts_independent_of_workers() {
        let (b, cases) = setup();
        let vocab = Arc::new(crate::policy::ActionVocabulary::from_spec(b.spec()));
        let make = |_: &CaseRecord| crate::policy::UniformRandomPolicy::new(vocab.clone());
        let cfg = |i: usize, _: &CaseRecord| EpisodeConfig { max_turns: 12, seed: i as u64 };
        let one: Vec<_> = run_episodes(make, &b, &cases, cfg, 1)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let four: Vec<_> = run_episodes(make, &b, &cases, cfg, 4)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(one, four);
    }
}
