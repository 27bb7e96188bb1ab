use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Capabilities, WorldModelBackend, WorldModelError};
use crate::cohort::CohortSpec;
use crate::prompts;
use crate::remote::{completion_text, Endpoint};
use crate::types::{
    normalize_term, ExamEvent, ExamResult, InitialInquiry, PatientProfile, Subevent,
};

/// Which output contract a prompt requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Numeric,
    Radiology,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptPayload {
    pub prompt: String,
    pub kind: ResultKind,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteWorldModelConfig {
    pub endpoint: Endpoint,
    /// Sampling temperature. Required: there is no safe default.
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    512
}

const IMAGING_MARKERS: [&str; 9] = [
    "ct", "x ray", "mri", "ultrasound", "radiograph", "scan", "angiograph", "echocardiogram",
    "doppler",
];

fn is_imaging(exam: &str) -> bool {
    let tokens: Vec<&str> = exam.split(' ').collect();
    IMAGING_MARKERS.iter().any(|m| {
        if m.contains(' ') {
            exam.contains(m)
        } else {
            tokens.iter().any(|t| t.starts_with(m))
        }
    })
}

fn context_text(profile: &PatientProfile) -> String {
    let inquiry: InitialInquiry = profile.project_inquiry();
    format!(
        "{}\nDiagnosis: {}",
        inquiry.as_text(),
        profile.true_diagnosis.raw
    )
}

fn past_events_text(history: &[ExamEvent]) -> String {
    if history.is_empty() {
        return "Past Events: None.".to_string();
    }
    let mut out = String::from("Past Events:");
    for e in history {
        out.push_str(&format!("\n[{}] {}: {}", e.step_index, e.exam_name, e.result.render()));
    }
    out
}

/// Builds the prompt for one query. Numeric panels known to `spec` use the
/// lab template with the expected subevents listed; imaging exams use the
/// radiology template; everything else uses the general template.
pub fn render_prompt(
    spec: Option<&CohortSpec>,
    profile: &PatientProfile,
    history: &[ExamEvent],
    query: &str,
) -> (String, ResultKind) {
    let exam = normalize_term(query);
    let context = context_text(profile);
    let past = past_events_text(history);
    let subevents = spec.and_then(|s| {
        s.diseases
            .iter()
            .find_map(|d| d.numeric_exam_params.get(&exam))
            .map(|ps| {
                ps.iter()
                    .map(|p| format!("{} ({})", p.name, p.unit))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
    });
    let case_block = format!("\n\nPatient Case Summary:\n{context}\n{past}\n");
    match subevents {
        Some(list) => {
            let head = prompts::render(
                prompts::SIMULATOR_LABEVENT,
                &[("exam_name", query), ("subevents_text", &list)],
            );
            (format!("{head}{case_block}"), ResultKind::Numeric)
        }
        None if is_imaging(&exam) => {
            let head = prompts::render(prompts::SIMULATOR_RADIOLOGY, &[("exam_name", query)]);
            (format!("{head}{case_block}"), ResultKind::Radiology)
        }
        None => (
            prompts::render(
                prompts::SIMULATOR_GENERAL,
                &[
                    ("context", &context),
                    ("past_events_text", &past),
                    ("exam_name", query),
                ],
            ),
            ResultKind::General,
        ),
    }
}

/// Parses `Name: Numeric Value: x Units: u` lines. Lines that do not follow
/// the format are ignored; a completion with no parsable line is malformed.
pub fn parse_numeric_panel(text: &str) -> Result<ExamResult, WorldModelError> {
    let mut subevents = Vec::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let Some((name, rest)) = line.split_once("Numeric Value:") else {
            continue;
        };
        let name = name.trim().trim_end_matches(':').trim();
        let (value, unit) = match rest.split_once("Units:") {
            Some((v, u)) => (v.trim(), u.trim()),
            None => (rest.trim(), ""),
        };
        let value = value.trim_end_matches(',').replace(',', "");
        let Ok(value) = value.parse::<f64>() else {
            continue;
        };
        if name.is_empty() || !value.is_finite() {
            continue;
        }
        subevents.push(Subevent {
            name: name.to_string(),
            value,
            unit: unit.to_string(),
        });
    }
    if subevents.is_empty() {
        return Err(WorldModelError::MalformedResult(format!(
            "no numeric subevent in completion {:?}",
            truncate(text, 120)
        )));
    }
    Ok(ExamResult::NumericPanel { subevents })
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// Sends one payload and parses the completion per its result kind.
pub fn remote_generate(
    endpoint: &Endpoint,
    payload: &PromptPayload,
) -> Result<ExamResult, WorldModelError> {
    let body = json!({
        "prompt": payload.prompt,
        "temperature": payload.temperature,
        "max_tokens": payload.max_tokens,
        "seed": payload.seed,
    });
    let raw = endpoint.post_json(&body)?;
    let text = completion_text(&raw);
    let text = text.trim();
    if text.is_empty() {
        return Err(WorldModelError::MalformedResult("empty completion".into()));
    }
    match payload.kind {
        ResultKind::Numeric => parse_numeric_panel(text),
        _ => Ok(ExamResult::free_text(text)),
    }
}

/// Open-vocabulary backend that forwards prompts to an HTTP completion
/// endpoint. Not deterministic: sampling happens remotely.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    cfg: RemoteWorldModelConfig,
    spec: Option<Arc<CohortSpec>>,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteWorldModelConfig) -> Self {
        Self { cfg, spec: None }
    }

    /// Supplies subevent lists for numeric panels.
    pub fn with_spec(mut self, spec: Arc<CohortSpec>) -> Self {
        self.spec = Some(spec);
        self
    }
}

impl WorldModelBackend for RemoteBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            deterministic_given_seed: false,
            supported_exams: None,
        }
    }

    fn generate(
        &self,
        profile: &PatientProfile,
        history: &[ExamEvent],
        query: &str,
        seed: u64,
    ) -> Result<ExamResult, WorldModelError> {
        if normalize_term(query).is_empty() {
            return Err(WorldModelError::EmptyQuery);
        }
        let (prompt, kind) = render_prompt(self.spec.as_deref(), profile, history, query);
        let payload = PromptPayload {
            prompt,
            kind,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
            seed,
        };
        remote_generate(&self.cfg.endpoint, &payload)
    }
}
