//! Domain types shared by every module: patient profiles, examination events,
//! episode state, agent actions and trajectories.
//!
//! All types are plain values. Transitions such as [`EpisodeState::append`]
//! return new values and never mutate their inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Placeholder written into empty background fields.
pub const NONE_FIELD: &str = "None.";

/// Text returned for examinations the environment cannot answer.
pub const NO_RESULT_TEXT: &str = "No result available for this examination.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("step index {got} does not follow turn {turn} (expected {expected})")]
    StepIndexMismatch { turn: usize, expected: usize, got: usize },
    #[error("examination name is empty after canonicalization")]
    EmptyExamName,
    #[error("diagnosis label is empty")]
    EmptyDiagnosis,
    #[error("numeric panel has no subevents")]
    EmptyPanel,
    #[error("non-finite value for subevent {0}")]
    NonFiniteValue(String),
    #[error("state turn {turn} does not match history length {len}")]
    TurnMismatch { turn: usize, len: usize },
    #[error("trajectory invariant violated: {0}")]
    Trajectory(String),
}

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
///
/// This is the judge-free part of canonicalization; alias resolution lives in
/// [`crate::reward::SynonymTable`].
pub fn normalize_term(term: &str) -> String {
    let mapped: String = term
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiagnosisLabel {
    pub raw: String,
    pub canonical: String,
}

impl DiagnosisLabel {
    /// Builds a label whose canonical form is the normalized raw text.
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let canonical = normalize_term(&raw);
        Self { raw, canonical }
    }

    pub fn with_canonical(raw: impl Into<String>, canonical: impl Into<String>) -> Self {
        Self {
            raw: raw.into(),
            canonical: canonical.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub case_id: String,
    pub chief_complaint: String,
    pub present_illness: String,
    pub past_history: String,
    pub family_history: String,
    pub other_background: String,
    pub true_diagnosis: DiagnosisLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_params_ref: Option<String>,
}

impl PatientProfile {
    pub fn validate(&self) -> Result<(), ContractError> {
        if self.true_diagnosis.is_empty() {
            return Err(ContractError::EmptyDiagnosis);
        }
        Ok(())
    }

    /// Projects the profile onto the fields visible to the agent.
    ///
    /// Empty background fields are written as `"None."`.
    pub fn project_inquiry(&self) -> InitialInquiry {
        let field = |s: &str| {
            if s.trim().is_empty() {
                NONE_FIELD.to_string()
            } else {
                s.to_string()
            }
        };
        InitialInquiry {
            case_id: self.case_id.clone(),
            chief_complaint: field(&self.chief_complaint),
            present_illness: field(&self.present_illness),
            past_history: field(&self.past_history),
            family_history: field(&self.family_history),
            other_background: field(&self.other_background),
        }
    }
}

/// Free-function form of [`PatientProfile::project_inquiry`].
pub fn project_inquiry(profile: &PatientProfile) -> InitialInquiry {
    profile.project_inquiry()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitialInquiry {
    pub case_id: String,
    pub chief_complaint: String,
    pub present_illness: String,
    pub past_history: String,
    pub family_history: String,
    pub other_background: String,
}

impl InitialInquiry {
    /// Re-attaches a diagnosis. Fields holding the `"None."` placeholder are
    /// restored as empty strings.
    pub fn attach_diagnosis(
        &self,
        true_diagnosis: DiagnosisLabel,
        cohort_params_ref: Option<String>,
    ) -> PatientProfile {
        let field = |s: &str| {
            if s == NONE_FIELD {
                String::new()
            } else {
                s.to_string()
            }
        };
        PatientProfile {
            case_id: self.case_id.clone(),
            chief_complaint: field(&self.chief_complaint),
            present_illness: field(&self.present_illness),
            past_history: field(&self.past_history),
            family_history: field(&self.family_history),
            other_background: field(&self.other_background),
            true_diagnosis,
            cohort_params_ref,
        }
    }

    pub fn as_text(&self) -> String {
        format!(
            "Chief complaint: {}\nHistory of present illness: {}\nPast medical history: {}\nFamily history: {}\nOther background: {}",
            self.chief_complaint,
            self.present_illness,
            self.past_history,
            self.family_history,
            self.other_background
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subevent {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ExamResult {
    NumericPanel { subevents: Vec<Subevent> },
    FreeText { text: String },
}

impl ExamResult {
    pub fn free_text(text: impl Into<String>) -> Self {
        ExamResult::FreeText { text: text.into() }
    }

    pub fn no_result() -> Self {
        Self::free_text(NO_RESULT_TEXT)
    }

    pub fn is_no_result(&self) -> bool {
        matches!(self, ExamResult::FreeText { text } if text == NO_RESULT_TEXT)
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        match self {
            ExamResult::NumericPanel { subevents } => {
                if subevents.is_empty() {
                    return Err(ContractError::EmptyPanel);
                }
                for s in subevents {
                    if !s.value.is_finite() {
                        return Err(ContractError::NonFiniteValue(s.name.clone()));
                    }
                }
                Ok(())
            }
            ExamResult::FreeText { .. } => Ok(()),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ExamResult::NumericPanel { .. })
    }

    /// Normalized finding sentences of a free-text result; empty for panels.
    pub fn findings(&self) -> Vec<String> {
        match self {
            ExamResult::FreeText { text } => split_findings(text),
            ExamResult::NumericPanel { .. } => Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        match self {
            ExamResult::NumericPanel { subevents } => subevents
                .iter()
                .map(|s| format!("{}: Numeric Value: {} Units: {}", s.name, s.value, s.unit))
                .collect::<Vec<_>>()
                .join("\n"),
            ExamResult::FreeText { text } => text.clone(),
        }
    }
}

/// Splits narrative text into normalized, non-empty sentences.
pub fn split_findings(text: &str) -> Vec<String> {
    text.split(['.', ';', '\n'])
        .map(normalize_term)
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamEvent {
    pub exam_name: String,
    pub result: ExamResult,
    pub step_index: usize,
}

impl ExamEvent {
    /// Canonicalizes the exam name and validates the result.
    pub fn new(
        exam_name: &str,
        result: ExamResult,
        step_index: usize,
    ) -> Result<Self, ContractError> {
        let exam_name = normalize_term(exam_name);
        if exam_name.is_empty() {
            return Err(ContractError::EmptyExamName);
        }
        result.validate()?;
        Ok(Self {
            exam_name,
            result,
            step_index,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub inquiry: InitialInquiry,
    pub history: Vec<ExamEvent>,
    pub turn: usize,
}

impl EpisodeState {
    pub fn initial(inquiry: InitialInquiry) -> Self {
        Self {
            inquiry,
            history: Vec::new(),
            turn: 0,
        }
    }

    /// Returns the successor state. `exam.step_index` must be `turn + 1`.
    pub fn append(&self, exam: ExamEvent) -> Result<Self, ContractError> {
        let expected = self.turn + 1;
        if exam.step_index != expected {
            return Err(ContractError::StepIndexMismatch {
                turn: self.turn,
                expected,
                got: exam.step_index,
            });
        }
        let mut history = self.history.clone();
        history.push(exam);
        let next = Self {
            inquiry: self.inquiry.clone(),
            history,
            turn: expected,
        };
        next.check()?;
        Ok(next)
    }

    pub fn check(&self) -> Result<(), ContractError> {
        if self.turn != self.history.len() {
            return Err(ContractError::TurnMismatch {
                turn: self.turn,
                len: self.history.len(),
            });
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("episode state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn queried(&self, exam_name: &str) -> bool {
        self.history.iter().any(|e| e.exam_name == exam_name)
    }
}

/// Free-function form of [`EpisodeState::append`].
pub fn state_append(state: &EpisodeState, exam: ExamEvent) -> Result<EpisodeState, ContractError> {
    state.append(exam)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum AgentAction {
    QueryExam { exam_name: String },
    Diagnose { diagnosis: DiagnosisLabel },
}

impl AgentAction {
    pub fn query(name: impl Into<String>) -> Self {
        AgentAction::QueryExam {
            exam_name: name.into(),
        }
    }

    pub fn diagnose(label: DiagnosisLabel) -> Self {
        AgentAction::Diagnose { diagnosis: label }
    }

    pub fn is_diagnose(&self) -> bool {
        matches!(self, AgentAction::Diagnose { .. })
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        match self {
            AgentAction::QueryExam { exam_name } if normalize_term(exam_name).is_empty() => {
                Err(ContractError::EmptyExamName)
            }
            AgentAction::Diagnose { diagnosis } if diagnosis.is_empty() => {
                Err(ContractError::EmptyDiagnosis)
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state_digest: String,
    pub action: AgentAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ExamResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub case_id: String,
    pub steps: Vec<TrajectoryStep>,
    pub final_diagnosis: Option<DiagnosisLabel>,
    pub turns_used: usize,
    pub truncated: bool,
    pub seed: u64,
}

impl Trajectory {
    /// Exam names in query order, duplicates included.
    pub fn queried_exams(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| match &s.action {
                AgentAction::QueryExam { exam_name } => Some(exam_name.as_str()),
                AgentAction::Diagnose { .. } => None,
            })
            .collect()
    }

    /// Exam events in order, rebuilt from the recorded steps.
    pub fn exam_events(&self) -> Vec<ExamEvent> {
        self.steps
            .iter()
            .filter_map(|s| match (&s.action, &s.result) {
                (AgentAction::QueryExam { exam_name }, Some(result)) => Some((exam_name, result)),
                _ => None,
            })
            .enumerate()
            .map(|(i, (name, result))| ExamEvent {
                exam_name: normalize_term(name),
                result: result.clone(),
                step_index: i + 1,
            })
            .collect()
    }

    pub fn validate(&self, max_turns: usize) -> Result<(), ContractError> {
        let last_is_diagnose = self.steps.last().is_some_and(|s| s.action.is_diagnose());
        if self.truncated != self.final_diagnosis.is_none() {
            return Err(ContractError::Trajectory(
                "truncated must equal absence of final diagnosis".into(),
            ));
        }
        if self.truncated == last_is_diagnose {
            return Err(ContractError::Trajectory(
                "last step must be Diagnose iff not truncated".into(),
            ));
        }
        if self.turns_used > max_turns + 1 {
            return Err(ContractError::Trajectory(format!(
                "turns_used {} exceeds limit {}",
                self.turns_used,
                max_turns + 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStep {
    pub exam_name: String,
    pub result: ExamResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub exams: Vec<ReferenceStep>,
    pub final_diagnosis: DiagnosisLabel,
}

impl ReferenceTrajectory {
    pub fn exam_names(&self) -> Vec<&str> {
        self.exams.iter().map(|s| s.exam_name.as_str()).collect()
    }

    /// Oracle state after the first `k` reference exams.
    pub fn prefix_state(
        &self,
        inquiry: &InitialInquiry,
        k: usize,
    ) -> Result<EpisodeState, ContractError> {
        let mut state = EpisodeState::initial(inquiry.clone());
        for (i, step) in self.exams.iter().take(k).enumerate() {
            state = state.append(ExamEvent::new(&step.exam_name, step.result.clone(), i + 1)?)?;
        }
        Ok(state)
    }
}

/// Machine-checkable process criterion over a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RubricPredicate {
    ExamOrdered { name: String },
    ExamBefore { first: String, second: String },
    TurnsAtMost { k: usize },
    DiagnosisCorrect,
    ExamAbsent { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub rubric_id: String,
    pub predicate: RubricPredicate,
    pub weight: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub profile: PatientProfile,
    pub inquiry: InitialInquiry,
    pub reference_trajectory: ReferenceTrajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubrics: Option<Vec<Rubric>>,
}

impl CaseRecord {
    pub fn case_id(&self) -> &str {
        &self.profile.case_id
    }

    pub fn disease_id(&self) -> &str {
        self.profile
            .cohort_params_ref
            .as_deref()
            .unwrap_or(&self.profile.true_diagnosis.canonical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(dx: &str) -> PatientProfile {
        PatientProfile {
            case_id: "c1".into(),
            chief_complaint: "abdominal pain".into(),
            present_illness: "two days of pain".into(),
            past_history: "hypertension".into(),
            family_history: String::new(),
            other_background: "non-smoker".into(),
            true_diagnosis: DiagnosisLabel::new(dx),
            cohort_params_ref: Some("appendicitis".into()),
        }
    }

    fn text_event(name: &str, idx: usize) -> ExamEvent {
        ExamEvent::new(name, ExamResult::free_text("Normal."), idx).unwrap()
    }

    #[test]
    fn append_to_empty_state() {
        let s0 = EpisodeState::initial(profile("appendicitis").project_inquiry());
        let s1 = state_append(&s0, text_event("CBC", 1)).unwrap();
        assert_eq!(s1.turn, 1);
        assert_eq!(s0.turn, 0);
        assert!(s0.history.is_empty());
    }

    #[test]
    fn duplicate_exam_is_kept() {
        let s0 = EpisodeState::initial(profile("x").project_inquiry());
        let s2 = s0
            .append(text_event("cbc", 1))
            .unwrap()
            .append(text_event("cbc", 2))
            .unwrap();
        assert_eq!(s2.turn, 2);
        assert_eq!(s2.history.len(), 2);
    }

    #[test]
    fn wrong_step_index_rejected() {
        let s0 = EpisodeState::initial(profile("x").project_inquiry());
        let err = s0.append(text_event("cbc", 2)).unwrap_err();
        assert_eq!(
            err,
            ContractError::StepIndexMismatch {
                turn: 0,
                expected: 1,
                got: 2
            }
        );
    }

    #[test]
    fn twelve_appends_roundtrip() {
        let mut s = EpisodeState::initial(profile("x").project_inquiry());
        for i in 1..=12 {
            s = s.append(text_event(&format!("exam {i}"), i)).unwrap();
        }
        assert_eq!(s.turn, 12);
        let json = serde_json::to_string(&s).unwrap();
        let back: EpisodeState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        let names: Vec<_> = back.history.iter().map(|e| e.exam_name.clone()).collect();
        assert_eq!(names[0], "exam 1");
        assert_eq!(names[11], "exam 12");
    }

    #[test]
    fn inquiry_hides_diagnosis() {
        let p = profile("appendicitis");
        let inquiry = project_inquiry(&p);
        let text = serde_json::to_string(&inquiry).unwrap();
        assert!(!normalize_term(&text).contains(&p.true_diagnosis.canonical));
        assert_eq!(inquiry.family_history, "None.");
        let back = inquiry.attach_diagnosis(p.true_diagnosis.clone(), p.cohort_params_ref.clone());
        assert_eq!(back, p);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_term("  Myocardial   Infarction. "), "myocardial infarction");
        assert_eq!(normalize_term("X-Ray, Chest"), "x ray chest");
    }

    #[test]
    fn empty_panel_invalid() {
        let r = ExamResult::NumericPanel { subevents: vec![] };
        assert_eq!(r.validate(), Err(ContractError::EmptyPanel));
        let r = ExamResult::NumericPanel {
            subevents: vec![Subevent {
                name: "wbc".into(),
                value: f64::NAN,
                unit: "K/uL".into(),
            }],
        };
        assert!(r.validate().is_err());
    }

    fn arb_result() -> impl Strategy<Value = ExamResult> {
        prop_oneof![
            "[a-z ]{0,20}".prop_map(ExamResult::free_text),
            prop::collection::vec(("[a-z]{1,8}", -1e6f64..1e6, "[a-zA-Z/%]{0,5}"), 1..5).prop_map(
                |v| ExamResult::NumericPanel {
                    subevents: v
                        .into_iter()
                        .map(|(name, value, unit)| Subevent { name, value, unit })
                        .collect()
                }
            ),
        ]
    }

    fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
        (
            prop::collection::vec(("[a-z]{1,10}", arb_result()), 0..6),
            prop::option::of("[a-z ]{1,12}"),
            any::<u64>(),
        )
            .prop_map(|(exams, dx, seed)| {
                let mut steps: Vec<TrajectoryStep> = exams
                    .into_iter()
                    .map(|(name, result)| TrajectoryStep {
                        state_digest: "00".into(),
                        action: AgentAction::query(name),
                        result: Some(result),
                    })
                    .collect();
                let final_diagnosis = dx.map(DiagnosisLabel::new);
                if let Some(d) = &final_diagnosis {
                    steps.push(TrajectoryStep {
                        state_digest: "01".into(),
                        action: AgentAction::diagnose(d.clone()),
                        result: None,
                    });
                }
                Trajectory {
                    case_id: "c".into(),
                    turns_used: steps.len(),
                    truncated: final_diagnosis.is_none(),
                    final_diagnosis,
                    steps,
                    seed,
                }
            })
    }

    proptest! {
        #[test]
        fn trajectory_roundtrip(t in arb_trajectory()) {
            let json = serde_json::to_string(&t).unwrap();
            let back: Trajectory = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn profile_roundtrip(cc in ".{0,30}", fh in ".{0,10}", dx in "[a-z]{1,10}( [a-z]{1,10})?") {
            let mut p = profile(&dx);
            p.chief_complaint = cc;
            p.family_history = fh;
            let json = serde_json::to_string(&p).unwrap();
            let back: PatientProfile = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn append_is_pure(n in 0usize..8) {
            let mut a = EpisodeState::initial(profile("x").project_inquiry());
            let mut b = a.clone();
            for i in 1..=n {
                a = a.append(text_event("cbc", i)).unwrap();
                b = b.append(text_event("cbc", i)).unwrap();
                prop_assert_eq!(a.turn, a.history.len());
            }
            prop_assert_eq!(a.digest(), b.digest());
        }
    }
}
