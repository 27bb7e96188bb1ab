//! Deterministic judging (canonicalization, synonym matching) and the
//! composite trajectory reward `λ1·r_diag + λ2·r_exam + λ3·r_turn`.

mod judge;
mod synonyms;

pub use judge::{Judge, JudgeError, RemoteJudge, RemoteJudgeConfig, TableJudge};
pub use synonyms::{Namespace, SynonymError, SynonymTable, SYNONYM_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CaseRecord, DiagnosisLabel, Trajectory};

/// Bonus granted by `r_turn` when the episode finishes within budget.
pub const TURN_BONUS: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum RewardConfigError {
    #[error("reward weights must be finite and non-negative")]
    NegativeWeight,
    #[error("t_max must be at least 1")]
    ZeroTurnLimit,
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub t_max: usize,
    /// Discount applied by the trainer to the terminal reward (`γ^T · R`).
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 1.0,
            t_max: 12,
            gamma: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.lambda1) && ok(self.lambda2) && ok(self.lambda3)) {
            return Err(RewardConfigError::NegativeWeight);
        }
        if self.t_max == 0 {
            return Err(RewardConfigError::ZeroTurnLimit);
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(RewardConfigError::Gamma(self.gamma));
        }
        Ok(())
    }

    pub fn max_total(&self) -> f64 {
        self.lambda1 + self.lambda2 + TURN_BONUS * self.lambda3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_diag: f64,
    pub r_exam: f64,
    pub r_turn: f64,
    pub total: f64,
}

pub fn canonicalize(table: &SynonymTable, term: &str, ns: Namespace) -> String {
    table.canonicalize(term, ns)
}

fn contains_tokens(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Diagnosis equivalence: equal canonicals, or the truth (or one of its
/// aliases) appears as a contiguous token run inside the prediction.
pub fn match_diagnosis(table: &SynonymTable, pred: &DiagnosisLabel, truth: &DiagnosisLabel) -> bool {
    let p = table.canonicalize(&pred.raw, Namespace::Diagnosis);
    let t = table.canonicalize(&truth.raw, Namespace::Diagnosis);
    if p.is_empty() || t.is_empty() {
        return false;
    }
    if p == t {
        return true;
    }
    let p_tokens: Vec<&str> = p.split(' ').collect();
    let pred_norm = crate::types::normalize_term(&pred.raw);
    let pred_norm_tokens: Vec<&str> = pred_norm.split(' ').collect();
    std::iter::once(t.as_str())
        .chain(table.aliases(&t, Namespace::Diagnosis).iter().map(String::as_str))
        .any(|needle| {
            let n: Vec<&str> = needle.split(' ').collect();
            contains_tokens(&p_tokens, &n) || contains_tokens(&pred_norm_tokens, &n)
        })
}

/// Deduplicated canonical exam names, first-occurrence order.
pub fn canonical_exam_set<S: AsRef<str>>(table: &SynonymTable, names: &[S]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let c = table.canonicalize(n.as_ref(), Namespace::Exam);
        if !c.is_empty() && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Counts (predicted items matching some reference item, reference items
/// matched by some predicted item) after canonicalization and
/// component expansion.
pub fn exam_set_overlap<S: AsRef<str>, T: AsRef<str>>(
    table: &SynonymTable,
    pred: &[S],
    reference: &[T],
) -> (usize, usize) {
    let p = canonical_exam_set(table, pred);
    let r = canonical_exam_set(table, reference);
    let matched_pred = p
        .iter()
        .filter(|a| r.iter().any(|b| table.exams_match(a, b)))
        .count();
    let matched_ref = r
        .iter()
        .filter(|b| p.iter().any(|a| table.exams_match(a, b)))
        .count();
    (matched_pred, matched_ref)
}

/// Maximum one-to-one matching between two canonical sets (Kuhn's algorithm).
pub fn matching_size(table: &SynonymTable, pred: &[String], reference: &[String]) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|a| {
            reference
                .iter()
                .enumerate()
                .filter(|(_, b)| table.exams_match(a, b))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut owner = vec![None; reference.len()];
    (0..pred.len())
        .filter(|&u| {
            let mut seen = vec![false; reference.len()];
            augment(u, &adj, &mut seen, &mut owner)
        })
        .count()
}

/// `2|P ∩ R| / (|P| + |R|)` over deduplicated canonical sets; 0 when both
/// are empty.
pub fn exam_f1<S: AsRef<str>, T: AsRef<str>>(table: &SynonymTable, pred: &[S], reference: &[T]) -> f64 {
    let p = canonical_exam_set(table, pred);
    let r = canonical_exam_set(table, reference);
    let denom = p.len() + r.len();
    if denom == 0 {
        return 0.0;
    }
    let m = matching_size(table, &p, &r);
    2.0 * m as f64 / denom as f64
}

pub fn compute_reward(
    traj: &Trajectory,
    case: &CaseRecord,
    cfg: &RewardConfig,
    table: &SynonymTable,
) -> RewardBreakdown {
    let r_diag = match (&traj.final_diagnosis, traj.truncated) {
        (Some(pred), false) if match_diagnosis(table, pred, &case.profile.true_diagnosis) => 1.0,
        _ => 0.0,
    };
    let r_exam = exam_f1(
        table,
        &traj.queried_exams(),
        &case.reference_trajectory.exam_names(),
    );
    let r_turn = if !traj.truncated && traj.turns_used <= cfg.t_max {
        TURN_BONUS
    } else {
        0.0
    };
    RewardBreakdown {
        r_diag,
        r_exam,
        r_turn,
        total: cfg.lambda1 * r_diag + cfg.lambda2 * r_exam + cfg.lambda3 * r_turn,
    }
}
