use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::reward::{match_diagnosis, Namespace, SynonymTable};
use crate::types::{CaseRecord, DiagnosisLabel, RubricPredicate, Trajectory};

fn first_index(traj: &Trajectory, name: &str, table: &SynonymTable) -> Option<usize> {
    let target = table.canonicalize(name, Namespace::Exam);
    traj.queried_exams()
        .iter()
        .position(|q| table.exams_match(&table.canonicalize(q, Namespace::Exam), &target))
}

/// Evaluates one predicate against a trajectory. `ExamBefore` needs both
/// exams present; `TurnsAtMost` fails on truncated trajectories.
pub fn check_rubric(
    traj: &Trajectory,
    truth: &DiagnosisLabel,
    predicate: &RubricPredicate,
    table: &SynonymTable,
) -> bool {
    match predicate {
        RubricPredicate::ExamOrdered { name } => first_index(traj, name, table).is_some(),
        RubricPredicate::ExamAbsent { name } => first_index(traj, name, table).is_none(),
        RubricPredicate::ExamBefore { first, second } => {
            match (first_index(traj, first, table), first_index(traj, second, table)) {
                (Some(a), Some(b)) => a < b,
                _ => false,
            }
        }
        RubricPredicate::TurnsAtMost { k } => !traj.truncated && traj.turns_used <= *k,
        RubricPredicate::DiagnosisCorrect => match (&traj.final_diagnosis, traj.truncated) {
            (Some(d), false) => match_diagnosis(table, d, truth),
            _ => false,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRubricScore {
    pub case_id: String,
    pub satisfied: Vec<String>,
    pub satisfied_weight: u32,
    pub total_weight: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricReport {
    /// Mean of per-case scores over scored cases.
    pub score: f64,
    pub cases: Vec<CaseRubricScore>,
    /// Cases without rubrics or with zero total weight.
    pub excluded: Vec<String>,
}

/// Weighted fraction of satisfied rubrics per case, averaged over cases.
/// Trajectories are matched to cases by case id.
pub fn eval_rubrics(
    trajectories: &[Trajectory],
    cases: &[CaseRecord],
    table: &SynonymTable,
) -> Result<RubricReport, EvalError> {
    let by_id: HashMap<&str, &Trajectory> =
        trajectories.iter().map(|t| (t.case_id.as_str(), t)).collect();
    let mut scored = Vec::new();
    let mut excluded = Vec::new();
    for case in cases {
        let rubrics = case.rubrics.as_deref().unwrap_or(&[]);
        let total_weight: u32 = rubrics.iter().map(|r| u32::from(r.weight)).sum();
        if total_weight == 0 {
            log::warn!("{}: no rubric weight, excluded from the score", case.case_id());
            excluded.push(case.case_id().to_string());
            continue;
        }
        let traj = by_id.get(case.case_id()).ok_or_else(|| EvalError::Case {
            case_id: case.case_id().to_string(),
            message: "no trajectory".into(),
        })?;
        let truth = &case.profile.true_diagnosis;
        let mut satisfied = Vec::new();
        let mut satisfied_weight = 0u32;
        for r in rubrics {
            if check_rubric(traj, truth, &r.predicate, table) {
                satisfied.push(r.rubric_id.clone());
                satisfied_weight += u32::from(r.weight);
            }
        }
        scored.push(CaseRubricScore {
            case_id: case.case_id().to_string(),
            satisfied,
            satisfied_weight,
            total_weight,
            score: f64::from(satisfied_weight) / f64::from(total_weight),
        });
    }
    let score = if scored.is_empty() {
        0.0
    } else {
        scored.iter().map(|c| c.score).sum::<f64>() / scored.len() as f64
    };
    Ok(RubricReport {
        score,
        cases: scored,
        excluded,
    })
}
