use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{canonical_exam_set, exam_set_overlap, match_diagnosis, Namespace, SynonymTable};
use crate::prompts;
use crate::remote::{completion_text, Endpoint, TransportError};
use crate::types::DiagnosisLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unparsable judge response: {0:?}")]
    Unparsable(String),
}

/// Yes/no and counting judgements used by the evaluators.
pub trait Judge: Send + Sync {
    fn diagnosis_correct(&self, pred: &DiagnosisLabel, truth: &DiagnosisLabel) -> Result<bool, JudgeError>;

    /// Whether `pred` names one of the `valid` exams (including components).
    fn exam_in_list(&self, pred: &str, valid: &[&str]) -> Result<bool, JudgeError>;

    /// `(matched_pred, matched_ref)` counts.
    fn exam_overlap(&self, pred: &[&str], reference: &[&str]) -> Result<(usize, usize), JudgeError>;

    /// Deduplicated exam names in first-occurrence order, as the judge
    /// counts them.
    fn exam_set(&self, names: &[&str]) -> Vec<String> {
        canonical_exam_set(&SynonymTable::empty(), names)
    }
}

/// Deterministic judge backed by a [`SynonymTable`].
#[derive(Debug, Clone, Default)]
pub struct TableJudge {
    pub table: SynonymTable,
}

impl TableJudge {
    pub fn new(table: SynonymTable) -> Self {
        Self { table }
    }
}

impl Judge for TableJudge {
    fn diagnosis_correct(&self, pred: &DiagnosisLabel, truth: &DiagnosisLabel) -> Result<bool, JudgeError> {
        Ok(match_diagnosis(&self.table, pred, truth))
    }

    fn exam_in_list(&self, pred: &str, valid: &[&str]) -> Result<bool, JudgeError> {
        let p = self.table.canonicalize(pred, Namespace::Exam);
        Ok(valid
            .iter()
            .any(|v| self.table.exams_match(&p, &self.table.canonicalize(v, Namespace::Exam))))
    }

    fn exam_overlap(&self, pred: &[&str], reference: &[&str]) -> Result<(usize, usize), JudgeError> {
        Ok(exam_set_overlap(&self.table, pred, reference))
    }

    fn exam_set(&self, names: &[&str]) -> Vec<String> {
        canonical_exam_set(&self.table, names)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteJudgeConfig {
    pub endpoint: Endpoint,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    16
}

/// Judge that sends the versioned judging prompts to a text-generation
/// endpoint and parses the constrained answers.
#[derive(Debug, Clone)]
pub struct RemoteJudge {
    cfg: RemoteJudgeConfig,
}

impl RemoteJudge {
    pub fn new(cfg: RemoteJudgeConfig) -> Self {
        Self { cfg }
    }

    fn complete(&self, prompt: String) -> Result<String, JudgeError> {
        let body = serde_json::json!({
            "prompt": prompt,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        Ok(completion_text(&self.cfg.endpoint.post_json(&body)?))
    }

    /// Free-form rubric check over a rendered conversation.
    pub fn rubric_satisfied(&self, conversation: &str, criterion: &str) -> Result<bool, JudgeError> {
        let prompt = prompts::render(
            prompts::JUDGE_RUBRIC,
            &[("messages", conversation), ("criterion", criterion)],
        );
        parse_binary(&self.complete(prompt)?, "yes", "no")
    }
}

pub(crate) fn parse_binary(text: &str, yes: &str, no: &str) -> Result<bool, JudgeError> {
    let t = text.trim().trim_matches(|c| c == '[' || c == ']').to_ascii_lowercase();
    match (t.starts_with(yes), t.starts_with(no)) {
        (true, false) => Ok(true),
        (false, true) => Ok(false),
        _ => Err(JudgeError::Unparsable(text.to_string())),
    }
}

pub(crate) fn parse_count(text: &str) -> Result<usize, JudgeError> {
    text.split(|c: char| !c.is_ascii_digit())
        .find(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| JudgeError::Unparsable(text.to_string()))
}

impl Judge for RemoteJudge {
    fn diagnosis_correct(&self, pred: &DiagnosisLabel, truth: &DiagnosisLabel) -> Result<bool, JudgeError> {
        let prompt = prompts::render(
            prompts::JUDGE_DIAGNOSIS,
            &[("pred_diag", &pred.raw), ("gt_diag", &truth.raw)],
        );
        parse_binary(&self.complete(prompt)?, "correct", "wrong")
    }

    fn exam_in_list(&self, pred: &str, valid: &[&str]) -> Result<bool, JudgeError> {
        let prompt = prompts::render(
            prompts::JUDGE_EXAM_IN_LIST,
            &[("pred_exam", pred), ("gt_exam", &valid.join(", "))],
        );
        parse_binary(&self.complete(prompt)?, "same", "different")
    }

    fn exam_overlap(&self, pred: &[&str], reference: &[&str]) -> Result<(usize, usize), JudgeError> {
        let key = reference.join(", ");
        let rec = pred.join(", ");
        let vars = [("key_exam_names", key.as_str()), ("recommended_exam_names", rec.as_str())];
        let p = parse_count(&self.complete(prompts::render(prompts::JUDGE_EXAM_PRECISION, &vars))?)?;
        let r = parse_count(&self.complete(prompts::render(prompts::JUDGE_EXAM_RECALL, &vars))?)?;
        Ok((p.min(pred.len()), r.min(reference.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remote::testing::serve;

    #[test]
    fn parsers() {
        assert_eq!(parse_binary("[Correct]", "correct", "wrong"), Ok(true));
        assert_eq!(parse_binary(" Wrong\n", "correct", "wrong"), Ok(false));
        assert!(parse_binary("maybe", "correct", "wrong").is_err());
        assert_eq!(parse_count("3"), Ok(3));
        assert_eq!(parse_count("Matches: 12."), Ok(12));
        assert!(parse_count("none").is_err());
    }

    #[test]
    fn remote_judge_round_trip() {
        let srv = serve(vec![
            (200, r#"{"text":"Correct"}"#.into()),
            (200, r#"{"text":"2"}"#.into()),
            (200, r#"{"text":"1"}"#.into()),
        ]);
        let judge = RemoteJudge::new(RemoteJudgeConfig {
            endpoint: Endpoint::new(&srv.url),
            temperature: 0.0,
            max_tokens: 8,
        });
        let ok = judge
            .diagnosis_correct(&DiagnosisLabel::new("heart attack"), &DiagnosisLabel::new("myocardial infarction"))
            .unwrap();
        assert!(ok);
        let (p, r) = judge.exam_overlap(&["cbc", "ct"], &["cbc"]).unwrap();
        assert_eq!((p, r), (2, 1));
        let reqs = srv.requests.lock().unwrap();
        assert!(reqs[0].contains("heart attack"));
        assert!(reqs[1].contains("Key exam list: cbc"));
    }

    #[test]
    fn table_judge_components() {
        let t = SynonymTable::parse(
            "schema_version = 1\n[exams.components]\n\"complete blood count\" = [\"rbc count\"]\n",
        )
        .unwrap();
        let j = TableJudge::new(t);
        assert!(j.exam_in_list("RBC count", &["complete blood count"]).unwrap());
        assert!(!j.exam_in_list("ct", &["complete blood count"]).unwrap());
    }
}
