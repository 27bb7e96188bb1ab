use serde::{Deserialize, Serialize};

use super::{harmonic, ratio, EvalError};
use crate::policy::Policy;
use crate::reward::Judge;
use crate::seed::derive_seed;
use crate::types::{CaseRecord, Trajectory};
use crate::worldmodel::{run_episode, EpisodeConfig, EpisodeError, WorldModelBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Ratios of summed counts.
    #[default]
    Micro,
    /// Means of per-case ratios.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndToEndConfig {
    pub max_turns: usize,
    pub seed: u64,
    pub averaging: Averaging,
    pub workers: usize,
}

impl Default for EndToEndConfig {
    fn default() -> Self {
        Self {
            max_turns: 12,
            seed: 0,
            averaging: Averaging::Micro,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub turns_used: usize,
    pub truncated: bool,
    pub protocol_error: bool,
    pub n_pred: usize,
    pub n_ref: usize,
    pub matched_pred: usize,
    pub matched_ref: usize,
    pub correct: bool,
}

impl CaseOutcome {
    pub fn precision(&self) -> f64 {
        ratio(self.matched_pred, self.n_pred)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched_ref, self.n_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub n_cases: usize,
    pub averaging: Averaging,
    pub avg_turns: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub truncated: usize,
    pub cases: Vec<CaseOutcome>,
}

impl EndToEndReport {
    pub fn from_outcomes(cases: Vec<CaseOutcome>, averaging: Averaging) -> Self {
        let n = cases.len();
        let sum = |f: &dyn Fn(&CaseOutcome) -> usize| cases.iter().map(f).sum::<usize>();
        let mean = |f: &dyn Fn(&CaseOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                cases.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let (precision, recall, f1) = match averaging {
            Averaging::Micro => {
                let p = ratio(sum(&|c| c.matched_pred), sum(&|c| c.n_pred));
                let r = ratio(sum(&|c| c.matched_ref), sum(&|c| c.n_ref));
                (p, r, harmonic(p, r))
            }
            Averaging::Macro => (
                mean(&|c| c.precision()),
                mean(&|c| c.recall()),
                mean(&|c| harmonic(c.precision(), c.recall())),
            ),
        };
        Self {
            n_cases: n,
            averaging,
            avg_turns: mean(&|c| c.turns_used as f64),
            precision,
            recall,
            f1,
            accuracy: ratio(cases.iter().filter(|c| c.correct).count(), n),
            truncated: cases.iter().filter(|c| c.truncated).count(),
            cases,
        }
    }
}

/// Scores one finished trajectory against its case.
pub fn score_trajectory(
    traj: &Trajectory,
    case: &CaseRecord,
    judge: &dyn Judge,
    protocol_error: bool,
) -> Result<CaseOutcome, EvalError> {
    let pred = judge.exam_set(&traj.queried_exams());
    let reference = judge.exam_set(&case.reference_trajectory.exam_names());
    let pred_refs: Vec<&str> = pred.iter().map(String::as_str).collect();
    let ref_refs: Vec<&str> = reference.iter().map(String::as_str).collect();
    let (matched_pred, matched_ref) = judge.exam_overlap(&pred_refs, &ref_refs)?;
    let correct = match (&traj.final_diagnosis, traj.truncated) {
        (Some(d), false) => judge.diagnosis_correct(d, &case.profile.true_diagnosis)?,
        _ => false,
    };
    Ok(CaseOutcome {
        case_id: case.case_id().to_string(),
        turns_used: traj.turns_used,
        truncated: traj.truncated,
        protocol_error,
        n_pred: pred.len(),
        n_ref: reference.len(),
        matched_pred,
        matched_ref,
        correct,
    })
}

/// Runs one episode per case from its initial inquiry. The episode seed of
/// a case depends only on `cfg.seed` and the case id. Protocol errors are
/// scored as truncated episodes.
pub fn eval_end_to_end<P, F>(
    make_policy: F,
    backend: &dyn WorldModelBackend,
    cases: &[CaseRecord],
    judge: &dyn Judge,
    cfg: &EndToEndConfig,
) -> Result<(EndToEndReport, Vec<Trajectory>), EvalError>
where
    P: Policy,
    F: Fn(&CaseRecord) -> P + Sync,
{
    let results = crate::parallel::map_indexed(cfg.workers, cases.len(), |i| {
        let case = &cases[i];
        let mut policy = make_policy(case);
        let episode = EpisodeConfig {
            max_turns: cfg.max_turns,
            seed: derive_seed(cfg.seed, case.case_id(), 0),
        };
        let (traj, protocol_error) = match run_episode(&mut policy, backend, case, &episode) {
            Ok(t) => (t, false),
            Err(EpisodeError::Protocol { turn, message, partial }) => {
                log::warn!("{}: protocol error at turn {turn}: {message}", case.case_id());
                (*partial, true)
            }
            Err(e) => return Err(EvalError::from(e)),
        };
        let outcome = score_trajectory(&traj, case, judge, protocol_error)?;
        Ok((outcome, traj))
    });
    let mut outcomes = Vec::with_capacity(cases.len());
    let mut trajectories = Vec::with_capacity(cases.len());
    for r in results {
        let (o, t) = r?;
        outcomes.push(o);
        trajectories.push(t);
    }
    Ok((EndToEndReport::from_outcomes(outcomes, cfg.averaging), trajectories))
}
