//! Evaluation protocols: single-turn probes on oracle prefixes, end-to-end
//! episodes against the world model, and weighted rubric scoring.

mod end_to_end;
mod rubric;
mod single_turn;
pub(crate) mod table;

pub use end_to_end::{eval_end_to_end, Averaging, CaseOutcome, EndToEndConfig, EndToEndReport};
pub use rubric::{check_rubric, eval_rubrics, CaseRubricScore, RubricReport};
pub use single_turn::{eval_single_turn, ProbeKind, ProbeRow, SingleTurnReport};
pub use table::{end_to_end_table, rubric_table, single_turn_table};

use thiserror::Error;

use crate::policy::PolicyError;
use crate::reward::JudgeError;
use crate::worldmodel::EpisodeError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("case {case_id}: {message}")]
    Case { case_id: String, message: String },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
