use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortSpec, DiseaseSpec};
use crate::types::{normalize_term, ExamEvent, ExamResult, PatientProfile};

/// Upper bounds on mean z-distance for scores 5, 4, 3, 2, 1.
pub const Z_THRESHOLDS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Lower bounds on finding-set Jaccard for scores 5, 4, 3, 2, 1.
pub const JACCARD_THRESHOLDS: [f64; 5] = [1.0, 0.8, 0.6, 0.4, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Similarity {
    pub score: u8,
    pub kind_mismatch: bool,
}

pub fn score_z_distance(d: f64) -> u8 {
    let pos = Z_THRESHOLDS.iter().position(|t| d <= *t).unwrap_or(5);
    5 - pos as u8
}

pub fn score_jaccard(j: f64) -> u8 {
    let pos = JACCARD_THRESHOLDS.iter().position(|t| j >= *t).unwrap_or(5);
    5 - pos as u8
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Standard deviation used to scale a subevent: the disease's own when it
/// defines the exam, else the cohort mixture.
fn subevent_sigma(spec: &CohortSpec, disease: Option<&DiseaseSpec>, exam: &str, name: &str) -> Option<f64> {
    disease
        .and_then(|d| d.subevent(exam, name).map(|p| p.stddev))
        .or_else(|| spec.mixture_moments(exam, name).map(|(_, sd)| sd))
        .filter(|sd| *sd > 0.0)
}

/// Scores a generated result against the reference result of the same exam
/// on a 0..=5 scale. Panels score by mean per-subevent distance in σ units;
/// narrative results by Jaccard overlap of finding sentences. A subevent
/// missing from the generated panel counts as infinitely far.
pub fn judge_step_similarity(
    spec: &CohortSpec,
    profile: &PatientProfile,
    exam: &str,
    gen: &ExamResult,
    reference: &ExamResult,
) -> Similarity {
    let exam = normalize_term(exam);
    match (gen, reference) {
        (ExamResult::NumericPanel { subevents: g }, ExamResult::NumericPanel { subevents: r }) => {
            let disease = spec.disease_for(profile);
            let mut total = 0.0;
            for rs in r {
                let dist = match (
                    g.iter().find(|gs| gs.name == rs.name),
                    subevent_sigma(spec, disease, &exam, &rs.name),
                ) {
                    (Some(gs), Some(sd)) => (gs.value - rs.value).abs() / sd,
                    (Some(gs), None) if gs.value == rs.value => 0.0,
                    _ => f64::INFINITY,
                };
                total += dist;
            }
            let mean = if r.is_empty() { 0.0 } else { total / r.len() as f64 };
            Similarity {
                score: score_z_distance(mean),
                kind_mismatch: false,
            }
        }
        (ExamResult::FreeText { .. }, ExamResult::FreeText { .. }) => {
            let a: BTreeSet<String> = gen.findings().into_iter().collect();
            let b: BTreeSet<String> = reference.findings().into_iter().collect();
            Similarity {
                score: score_jaccard(jaccard(&a, &b)),
                kind_mismatch: false,
            }
        }
        _ => Similarity {
            score: 0,
            kind_mismatch: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum Violation {
    Envelope { step: usize, subevent: String, sigmas: f64 },
    Jump { step: usize, subevent: String, sigmas: f64 },
    ExclusiveFindings { first: String, second: String },
}

/// Rule violations in a chain of results for one patient, under the cohort's
/// consistency rules: values outside the disease envelope, repeat measurements
/// jumping too far, and mutually exclusive findings.
pub fn chain_violations(spec: &CohortSpec, profile: &PatientProfile, events: &[ExamEvent]) -> Vec<Violation> {
    let rules = &spec.consistency;
    let disease = spec.disease_for(profile);
    let mut out = Vec::new();
    let mut findings = BTreeSet::new();
    for (i, ev) in events.iter().enumerate() {
        let exam = normalize_term(&ev.exam_name);
        match &ev.result {
            ExamResult::NumericPanel { subevents } => {
                let previous = events[..i].iter().rev().find_map(|p| match &p.result {
                    ExamResult::NumericPanel { subevents } if normalize_term(&p.exam_name) == exam => {
                        Some(subevents)
                    }
                    _ => None,
                });
                for s in subevents {
                    let Some(params) = disease.and_then(|d| d.subevent(&exam, &s.name)) else {
                        continue;
                    };
                    let off = (s.value - params.mean).abs() / params.stddev;
                    if !(off <= rules.envelope_sigmas) {
                        out.push(Violation::Envelope {
                            step: ev.step_index,
                            subevent: s.name.clone(),
                            sigmas: off,
                        });
                    }
                    if let Some(prev) = previous.and_then(|p| p.iter().find(|p| p.name == s.name)) {
                        let jump = (s.value - prev.value).abs() / params.stddev;
                        if jump > rules.max_jump_sigmas {
                            out.push(Violation::Jump {
                                step: ev.step_index,
                                subevent: s.name.clone(),
                                sigmas: jump,
                            });
                        }
                    }
                }
            }
            ExamResult::FreeText { .. } => findings.extend(ev.result.findings()),
        }
    }
    for [a, b] in &rules.exclusive_findings {
        let (a, b) = (normalize_term(a), normalize_term(b));
        if findings.contains(&a) && findings.contains(&b) {
            out.push(Violation::ExclusiveFindings { first: a, second: b });
        }
    }
    out
}

/// 1 when the chain has no rule violations, else 0.
pub fn judge_chain_consistency(spec: &CohortSpec, profile: &PatientProfile, events: &[ExamEvent]) -> u8 {
    u8::from(chain_violations(spec, profile, events).is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{builtin_spec, generate_cohort, GenerateOptions};
    use crate::types::{CaseRecord, Subevent};

    fn case() -> (CohortSpec, CaseRecord) {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, 1, 9, &GenerateOptions::default()).unwrap();
        (spec, cases.into_iter().next().unwrap())
    }

    fn events(case: &CaseRecord) -> Vec<ExamEvent> {
        case.reference_trajectory
            .exams
            .iter()
            .enumerate()
            .map(|(i, s)| ExamEvent::new(&s.exam_name, s.result.clone(), i + 1).unwrap())
            .collect()
    }

    fn first_numeric(spec: &CohortSpec, case: &CaseRecord) -> (String, String, f64, f64) {
        let d = spec.disease_for(&case.profile).unwrap();
        let (exam, params) = d.numeric_exam_params.iter().next().unwrap();
        (exam.clone(), params[0].name.clone(), params[0].mean, params[0].stddev)
    }

    fn panel(name: &str, value: f64, unit: &str) -> ExamResult {
        ExamResult::NumericPanel {
            subevents: vec![Subevent {
                name: name.into(),
                value,
                unit: unit.into(),
            }],
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(score_z_distance(0.0), 5);
        assert_eq!(score_z_distance(3.0), 1);
        assert_eq!(score_z_distance(4.5), 0);
        assert_eq!(score_z_distance(f64::INFINITY), 0);
        assert_eq!(score_jaccard(1.0), 5);
        assert_eq!(score_jaccard(0.7), 3);
        assert_eq!(score_jaccard(0.0), 0);
    }

    #[test]
    fn step_similarity() {
        let (spec, c) = case();
        let (exam, name, mean, sd) = first_numeric(&spec, &c);
        let r = panel(&name, mean, "u");
        assert_eq!(judge_step_similarity(&spec, &c.profile, &exam, &r, &r).score, 5);
        let g = panel(&name, mean + 3.0 * sd, "u");
        assert_eq!(judge_step_similarity(&spec, &c.profile, &exam, &g, &r).score, 1);
        let t = ExamResult::free_text("a. b. c. d. e. f. g.");
        let u = ExamResult::free_text("a. b. c. d. e. f. g. h. i. j.");
        assert_eq!(judge_step_similarity(&spec, &c.profile, "x", &t, &u).score, 3);
        let mixed = judge_step_similarity(&spec, &c.profile, &exam, &t, &r);
        assert_eq!(mixed, Similarity { score: 0, kind_mismatch: true });
    }

    #[test]
    fn reference_chain_is_consistent() {
        let spec = builtin_spec();
        for c in generate_cohort(&spec, 200, 4, &GenerateOptions::default()).unwrap() {
            let v = chain_violations(&spec, &c.profile, &events(&c));
            assert!(v.is_empty(), "{}: {v:?}", c.case_id());
        }
    }

    #[test]
    fn envelope_violation() {
        let (spec, c) = case();
        let (exam, name, mean, sd) = first_numeric(&spec, &c);
        let mut ev = events(&c);
        ev.push(ExamEvent::new(&exam, panel(&name, mean + 10.0 * sd, "u"), ev.len() + 1).unwrap());
        assert_eq!(judge_chain_consistency(&spec, &c.profile, &ev), 0);
    }

    #[test]
    fn jump_violation() {
        let (spec, c) = case();
        let (exam, name, mean, sd) = first_numeric(&spec, &c);
        let ev = vec![
            ExamEvent::new(&exam, panel(&name, mean + 4.0 * sd, "u"), 1).unwrap(),
            ExamEvent::new(&exam, panel(&name, mean - 4.0 * sd, "u"), 2).unwrap(),
        ];
        let v = chain_violations(&spec, &c.profile, &ev);
        assert!(matches!(v.as_slice(), [Violation::Jump { step: 2, .. }]), "{v:?}");
        let calm = vec![ev[0].clone(), ExamEvent::new(&exam, panel(&name, mean, "u"), 2).unwrap()];
        assert_eq!(judge_chain_consistency(&spec, &c.profile, &calm), 1);
    }

    #[test]
    fn exclusive_findings() {
        let (spec, c) = case();
        let [a, b] = spec.consistency.exclusive_findings[0].clone();
        let ev = vec![
            ExamEvent::new("x", ExamResult::free_text(a), 1).unwrap(),
            ExamEvent::new("y", ExamResult::free_text(b), 2).unwrap(),
        ];
        assert_eq!(judge_chain_consistency(&spec, &c.profile, &ev), 0);
    }
}
