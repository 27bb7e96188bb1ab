use serde::{Deserialize, Serialize};

use super::{ratio, EvalError};
use crate::policy::{ActionConstraint, Policy};
use crate::reward::Judge;
use crate::seed::derive_seed;
use crate::types::{AgentAction, CaseRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Exam,
    Diagnosis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub case_id: String,
    /// Number of oracle exams in the prefix.
    pub position: usize,
    pub kind: ProbeKind,
    pub predicted: String,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTurnReport {
    pub n_exam_probes: usize,
    pub n_diag_probes: usize,
    pub exam_hits: usize,
    pub correct_diagnoses: usize,
    pub hit_ratio: f64,
    pub diagnosis_accuracy: f64,
    pub rows: Vec<ProbeRow>,
}

fn action_text(a: &AgentAction) -> String {
    match a {
        AgentAction::QueryExam { exam_name } => exam_name.clone(),
        AgentAction::Diagnose { diagnosis } => diagnosis.raw.clone(),
    }
}

fn probe_case<P: Policy>(
    policy: &mut P,
    case: &CaseRecord,
    judge: &dyn Judge,
    seed: u64,
) -> Result<Vec<ProbeRow>, EvalError> {
    let reference = &case.reference_trajectory;
    let names = reference.exam_names();
    let case_err = |e: &dyn std::fmt::Display| EvalError::Case {
        case_id: case.case_id().to_string(),
        message: e.to_string(),
    };
    let mut rows = Vec::with_capacity(names.len() + 1);
    for k in 0..=names.len() {
        let state = reference.prefix_state(&case.inquiry, k).map_err(|e| case_err(&e))?;
        let final_turn = k == names.len();
        let constraint = if final_turn {
            ActionConstraint::DiagnoseOnly
        } else {
            ActionConstraint::ExamOnly
        };
        let action = policy.act(&state, derive_seed(seed, case.case_id(), k as u64), constraint)?;
        let hit = match (&action, final_turn) {
            (AgentAction::QueryExam { exam_name }, false) => {
                judge.exam_in_list(exam_name, &names[k..])?
            }
            (AgentAction::Diagnose { diagnosis }, true) => {
                judge.diagnosis_correct(diagnosis, &case.profile.true_diagnosis)?
            }
            // An action of the wrong type never scores.
            _ => false,
        };
        rows.push(ProbeRow {
            case_id: case.case_id().to_string(),
            position: k,
            kind: if final_turn {
                ProbeKind::Diagnosis
            } else {
                ProbeKind::Exam
            },
            predicted: action_text(&action),
            hit,
        });
    }
    Ok(rows)
}

/// Conditions the policy on every oracle prefix of every reference
/// trajectory. Intermediate positions force an exam query, scored as a hit
/// when it names one of the remaining reference exams; the final position
/// forces a diagnosis.
pub fn eval_single_turn<P, F>(
    make_policy: F,
    cases: &[CaseRecord],
    judge: &dyn Judge,
    seed: u64,
    workers: usize,
) -> Result<SingleTurnReport, EvalError>
where
    P: Policy,
    F: Fn(&CaseRecord) -> P + Sync,
{
    let per_case = crate::parallel::map_indexed(workers, cases.len(), |i| {
        let mut policy = make_policy(&cases[i]);
        probe_case(&mut policy, &cases[i], judge, seed)
    });
    let mut rows = Vec::new();
    for r in per_case {
        rows.extend(r?);
    }
    let count = |kind: ProbeKind, hit: bool| {
        rows.iter()
            .filter(|r| r.kind == kind && (!hit || r.hit))
            .count()
    };
    let n_exam_probes = count(ProbeKind::Exam, false);
    let n_diag_probes = count(ProbeKind::Diagnosis, false);
    let exam_hits = count(ProbeKind::Exam, true);
    let correct_diagnoses = count(ProbeKind::Diagnosis, true);
    Ok(SingleTurnReport {
        n_exam_probes,
        n_diag_probes,
        exam_hits,
        correct_diagnoses,
        hit_ratio: ratio(exam_hits, n_exam_probes),
        diagnosis_accuracy: ratio(correct_diagnoses, n_diag_probes),
        rows,
    })
}
