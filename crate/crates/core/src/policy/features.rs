use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ActionVocabulary;
use crate::cohort::CohortSpec;
use crate::types::{normalize_term, split_findings, EpisodeState, ExamResult};

/// Bound on standardized numeric features.
pub const Z_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubeventFeature {
    pub exam: String,
    pub subevent: String,
    pub mean: f64,
    pub stddev: f64,
}

impl SubeventFeature {
    pub fn key(&self) -> String {
        format!("{}/{}", self.exam, self.subevent)
    }
}

/// Fixed-length state encoding, in order:
///
/// * bias
/// * one queried indicator per vocabulary exam, then a shared bucket for
///   out-of-vocabulary exams
/// * the last observed z-score of each numeric subevent (0 until observed)
/// * turn / max_turns
/// * one indicator per known finding sentence
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub exams: Vec<String>,
    pub subevents: Vec<SubeventFeature>,
    pub findings: Vec<String>,
    pub max_turns: usize,
    #[serde(skip)]
    exam_index: HashMap<String, usize>,
    #[serde(skip)]
    subevent_index: HashMap<(String, String), usize>,
    #[serde(skip)]
    finding_index: HashMap<String, usize>,
}

impl FeatureLayout {
    pub fn from_spec(spec: &CohortSpec, vocab: &ActionVocabulary, max_turns: usize) -> Self {
        let subevents = spec
            .subevent_keys()
            .into_iter()
            .map(|(exam, subevent, _)| {
                let (mean, stddev) = spec.mixture_moments(&exam, &subevent).unwrap_or((0.0, 1.0));
                SubeventFeature {
                    exam,
                    subevent,
                    mean,
                    stddev: if stddev > 0.0 { stddev } else { 1.0 },
                }
            })
            .collect();
        let mut findings: Vec<String> = spec
            .diseases
            .iter()
            .flat_map(|d| d.text_exam_templates.values().flatten())
            .flat_map(|t| split_findings(&t.sentence))
            .chain(split_findings(&spec.normal_finding))
            .collect();
        findings.sort();
        findings.dedup();
        let mut layout = Self {
            exams: vocab.exams.clone(),
            subevents,
            findings,
            max_turns: max_turns.max(1),
            exam_index: HashMap::new(),
            subevent_index: HashMap::new(),
            finding_index: HashMap::new(),
        };
        layout.reindex();
        layout
    }

    pub(crate) fn reindex(&mut self) {
        self.exam_index = self.exams.iter().cloned().zip(0..).collect();
        self.subevent_index = self
            .subevents
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.exam.clone(), s.subevent.clone()), i))
            .collect();
        self.finding_index = self.findings.iter().cloned().zip(0..).collect();
    }

    fn exam_offset(&self) -> usize {
        1
    }

    fn subevent_offset(&self) -> usize {
        self.exam_offset() + self.exams.len() + 1
    }

    fn turn_offset(&self) -> usize {
        self.subevent_offset() + self.subevents.len()
    }

    fn finding_offset(&self) -> usize {
        self.turn_offset() + 1
    }

    pub fn dim(&self) -> usize {
        self.finding_offset() + self.findings.len()
    }

    /// Index of the shared out-of-vocabulary exam bucket.
    pub fn oov_index(&self) -> usize {
        self.exam_offset() + self.exams.len()
    }

    pub fn featurize(&self, state: &EpisodeState) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        f[0] = 1.0;
        for event in &state.history {
            let exam = normalize_term(&event.exam_name);
            let slot = match self.exam_index.get(&exam) {
                Some(&i) => self.exam_offset() + i,
                None => self.oov_index(),
            };
            f[slot] = 1.0;
            match &event.result {
                ExamResult::NumericPanel { subevents } => {
                    for s in subevents {
                        let key = (exam.clone(), s.name.clone());
                        if let Some(&i) = self.subevent_index.get(&key) {
                            let p = &self.subevents[i];
                            let z = ((s.value - p.mean) / p.stddev).clamp(-Z_CLIP, Z_CLIP);
                            f[self.subevent_offset() + i] = if z.is_finite() { z } else { 0.0 };
                        }
                    }
                }
                ExamResult::FreeText { .. } => {
                    for finding in event.result.findings() {
                        if let Some(&i) = self.finding_index.get(&finding) {
                            f[self.finding_offset() + i] = 1.0;
                        }
                    }
                }
            }
        }
        f[self.turn_offset()] = state.turn as f64 / self.max_turns as f64;
        f
    }
}
