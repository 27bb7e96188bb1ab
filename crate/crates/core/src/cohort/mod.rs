//! Synthetic patient cohorts with known generating distributions, and the
//! on-disk case store.
//!
//! Numeric examination results are Gaussian per (disease, subevent). Free-text
//! results are the union of template findings, each emitted independently with
//! its own probability.

mod fixture;
mod store;

pub use fixture::{builtin_spec, builtin_synonyms, BUILTIN_SPEC_JSON, BUILTIN_SYNONYMS_TOML};
pub use store::{CaseStore, SplitManifest, StoreError};

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::derive_seed;
use crate::types::{
    normalize_term, CaseRecord, DiagnosisLabel, ExamResult, PatientProfile, ReferenceStep,
    ReferenceTrajectory, Subevent,
};

pub const COHORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohortError {
    #[error("configuration error: {0}")]
    Config(String),
}

fn config<T>(msg: impl Into<String>) -> Result<T, CohortError> {
    Err(CohortError::Config(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubeventParams {
    pub name: String,
    pub mean: f64,
    pub stddev: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingTemplate {
    pub sentence: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundTemplates {
    pub chief_complaint: Vec<String>,
    pub present_illness: Vec<String>,
    pub past_history: Vec<String>,
    pub family_history: Vec<String>,
    pub other_background: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiseaseSpec {
    pub disease_id: String,
    pub diagnosis: String,
    pub prior: f64,
    pub numeric_exam_params: BTreeMap<String, Vec<SubeventParams>>,
    pub text_exam_templates: BTreeMap<String, Vec<FindingTemplate>>,
    pub discriminative_exams: Vec<String>,
    pub background_templates: BackgroundTemplates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyRules {
    /// Values further than this many σ from the disease mean are inconsistent.
    pub envelope_sigmas: f64,
    /// Repeat measurements jumping more than this many σ are inconsistent.
    pub max_jump_sigmas: f64,
    /// Findings that must not co-occur within one trajectory.
    #[serde(default)]
    pub exclusive_findings: Vec<[String; 2]>,
}

impl Default for ConsistencyRules {
    fn default() -> Self {
        Self {
            envelope_sigmas: 6.0,
            max_jump_sigmas: 6.0,
            exclusive_findings: Vec::new(),
        }
    }
}

/// A versioned cohort description: the disease mixture plus shared settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub schema_version: u32,
    /// Exams every reference trajectory may open with, in order.
    pub routine_exams: Vec<String>,
    /// Sentence emitted when a text exam produces no templated finding.
    pub normal_finding: String,
    #[serde(default)]
    pub consistency: ConsistencyRules,
    pub diseases: Vec<DiseaseSpec>,
}

impl DiseaseSpec {
    pub fn has_exam(&self, exam: &str) -> bool {
        self.numeric_exam_params.contains_key(exam) || self.text_exam_templates.contains_key(exam)
    }

    pub fn subevent(&self, exam: &str, subevent: &str) -> Option<&SubeventParams> {
        self.numeric_exam_params
            .get(exam)?
            .iter()
            .find(|s| s.name == subevent)
    }

    /// Draws one result for `exam`. When `previous` holds an earlier panel of
    /// the same exam, each subevent follows an AR(1) step with coefficient
    /// `ar` toward the disease mean; innovation variance is scaled by
    /// `1 - ar²` so the marginal stays at the disease distribution.
    pub fn sample_exam<R: Rng>(
        &self,
        exam: &str,
        rng: &mut R,
        previous: Option<&ExamResult>,
        ar: f64,
        normal_finding: &str,
    ) -> Option<ExamResult> {
        if let Some(params) = self.numeric_exam_params.get(exam) {
            let prev_value = |name: &str| match previous {
                Some(ExamResult::NumericPanel { subevents }) => {
                    subevents.iter().find(|s| s.name == name).map(|s| s.value)
                }
                _ => None,
            };
            let subevents = params
                .iter()
                .map(|p| {
                    let z: f64 = rng.sample(StandardNormal);
                    let value = match prev_value(&p.name) {
                        Some(v) => p.mean + ar * (v - p.mean) + p.stddev * (1.0 - ar * ar).sqrt() * z,
                        None => p.mean + p.stddev * z,
                    };
                    Subevent {
                        name: p.name.clone(),
                        value,
                        unit: p.unit.clone(),
                    }
                })
                .collect();
            return Some(ExamResult::NumericPanel { subevents });
        }
        let templates = self.text_exam_templates.get(exam)?;
        let emitted: Vec<&str> = templates
            .iter()
            .filter(|t| rng.random::<f64>() < t.probability)
            .map(|t| t.sentence.as_str())
            .collect();
        let text = if emitted.is_empty() {
            normal_finding.to_string()
        } else {
            emitted.join(" ")
        };
        Some(ExamResult::free_text(text))
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), CohortError> {
        if self.schema_version != COHORT_SCHEMA_VERSION {
            return config(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.diseases.is_empty() {
            return config("cohort has no diseases");
        }
        let prior_sum: f64 = self.diseases.iter().map(|d| d.prior).sum();
        if (prior_sum - 1.0).abs() > 1e-9 {
            return config(format!("disease priors sum to {prior_sum}, expected 1"));
        }
        let mut ids = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for d in &self.diseases {
            if !ids.insert(d.disease_id.as_str()) {
                return config(format!("duplicate disease_id {}", d.disease_id));
            }
            if normalize_term(&d.diagnosis).is_empty() {
                return config(format!("{}: empty diagnosis", d.disease_id));
            }
            if !labels.insert(normalize_term(&d.diagnosis)) {
                return config(format!("{}: duplicate diagnosis label", d.disease_id));
            }
            if !(d.prior.is_finite() && d.prior >= 0.0) {
                return config(format!("{}: invalid prior", d.disease_id));
            }
            for (exam, params) in &d.numeric_exam_params {
                check_name(exam)?;
                if params.is_empty() {
                    return config(format!("{}: exam {exam} has no subevents", d.disease_id));
                }
                for p in params {
                    if !(p.stddev > 0.0 && p.stddev.is_finite() && p.mean.is_finite()) {
                        return config(format!(
                            "{}: {exam}/{} needs finite mean and stddev > 0",
                            d.disease_id, p.name
                        ));
                    }
                }
                if d.text_exam_templates.contains_key(exam) {
                    return config(format!("{}: {exam} is both numeric and text", d.disease_id));
                }
            }
            for (exam, templates) in &d.text_exam_templates {
                check_name(exam)?;
                for t in templates {
                    if !(0.0..=1.0).contains(&t.probability) {
                        return config(format!("{}: {exam} probability out of range", d.disease_id));
                    }
                }
            }
            for exam in d.discriminative_exams.iter().chain(&self.routine_exams) {
                if !d.has_exam(exam) {
                    return config(format!("{}: exam {exam:?} has no parameters", d.disease_id));
                }
            }
        }
        Ok(())
    }

    pub fn disease(&self, disease_id: &str) -> Option<&DiseaseSpec> {
        self.diseases.iter().find(|d| d.disease_id == disease_id)
    }

    /// Looks up the generating disease of a profile by its parameter reference,
    /// falling back to the diagnosis label.
    pub fn disease_for(&self, profile: &PatientProfile) -> Option<&DiseaseSpec> {
        if let Some(id) = &profile.cohort_params_ref {
            if let Some(d) = self.disease(id) {
                return Some(d);
            }
        }
        self.diseases
            .iter()
            .find(|d| normalize_term(&d.diagnosis) == profile.true_diagnosis.canonical)
    }

    /// All exam names, sorted.
    pub fn exam_names(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .diseases
            .iter()
            .flat_map(|d| d.numeric_exam_params.keys().chain(d.text_exam_templates.keys()))
            .collect();
        set.into_iter().cloned().collect()
    }

    /// `(exam, subevent, unit)` keys of all numeric subevents, sorted.
    pub fn subevent_keys(&self) -> Vec<(String, String, String)> {
        let mut set = BTreeMap::new();
        for d in &self.diseases {
            for (exam, params) in &d.numeric_exam_params {
                for p in params {
                    set.entry((exam.clone(), p.name.clone()))
                        .or_insert_with(|| p.unit.clone());
                }
            }
        }
        set.into_iter().map(|((e, s), u)| (e, s, u)).collect()
    }

    /// Mixture mean and standard deviation of a subevent over the disease
    /// priors, restricted to diseases that define it.
    pub fn mixture_moments(&self, exam: &str, subevent: &str) -> Option<(f64, f64)> {
        let comps: Vec<(f64, &SubeventParams)> = self
            .diseases
            .iter()
            .filter_map(|d| d.subevent(exam, subevent).map(|p| (d.prior, p)))
            .collect();
        let w: f64 = comps.iter().map(|(w, _)| w).sum();
        if comps.is_empty() || w <= 0.0 {
            return None;
        }
        let mean = comps.iter().map(|(pw, p)| pw * p.mean).sum::<f64>() / w;
        let second = comps
            .iter()
            .map(|(pw, p)| pw * (p.stddev * p.stddev + p.mean * p.mean))
            .sum::<f64>()
            / w;
        Some((mean, (second - mean * mean).max(0.0).sqrt()))
    }

    /// Normalized finding sentences across all text templates, sorted, plus
    /// the normal finding.
    pub fn finding_vocabulary(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = self
            .diseases
            .iter()
            .flat_map(|d| d.text_exam_templates.values().flatten())
            .map(|t| normalize_term(&t.sentence))
            .collect();
        set.insert(normalize_term(&self.normal_finding));
        set.into_iter().collect()
    }

    pub fn diagnosis_labels(&self) -> Vec<DiagnosisLabel> {
        self.diseases
            .iter()
            .map(|d| DiagnosisLabel::new(&d.diagnosis))
            .collect()
    }
}

fn check_name(exam: &str) -> Result<(), CohortError> {
    if exam.is_empty() || normalize_term(exam) != exam {
        return config(format!("exam name {exam:?} is not canonical"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateOptions {
    /// How many of the cohort's routine exams open each reference trajectory.
    pub routine_exams: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { routine_exams: 2 }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    if items.is_empty() {
        ""
    } else {
        &items[rng.random_range(0..items.len())]
    }
}

fn pick_disease<R: Rng>(rng: &mut R, diseases: &[DiseaseSpec]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, d) in diseases.iter().enumerate() {
        acc += d.prior;
        if u < acc {
            return i;
        }
    }
    diseases.len() - 1
}

/// Generates `n_cases` i.i.d. cases. Case `i` draws from its own stream
/// `derive_seed(seed, "case", i)`, so output is independent of thread count.
pub fn generate_cohort(
    spec: &CohortSpec,
    n_cases: usize,
    seed: u64,
    opts: &GenerateOptions,
) -> Result<Vec<CaseRecord>, CohortError> {
    spec.validate()?;
    if n_cases == 0 {
        return config("n_cases must be at least 1");
    }
    if opts.routine_exams > spec.routine_exams.len() {
        return config(format!(
            "requested {} routine exams but the cohort declares {}",
            opts.routine_exams,
            spec.routine_exams.len()
        ));
    }
    let width = n_cases.to_string().len().max(6);
    Ok((0..n_cases)
        .into_par_iter()
        .map(|i| generate_case(spec, i, width, seed, opts))
        .collect())
}

fn generate_case(
    spec: &CohortSpec,
    index: usize,
    width: usize,
    seed: u64,
    opts: &GenerateOptions,
) -> CaseRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "case", index as u64));
    let disease = &spec.diseases[pick_disease(&mut rng, &spec.diseases)];
    let bg = &disease.background_templates;
    let profile = PatientProfile {
        case_id: format!("case-{index:0width$}"),
        chief_complaint: pick(&mut rng, &bg.chief_complaint).to_string(),
        present_illness: pick(&mut rng, &bg.present_illness).to_string(),
        past_history: pick(&mut rng, &bg.past_history).to_string(),
        family_history: pick(&mut rng, &bg.family_history).to_string(),
        other_background: pick(&mut rng, &bg.other_background).to_string(),
        true_diagnosis: DiagnosisLabel::new(&disease.diagnosis),
        cohort_params_ref: Some(disease.disease_id.clone()),
    };
    let mut exams: Vec<&String> = spec.routine_exams[..opts.routine_exams].iter().collect();
    for e in &disease.discriminative_exams {
        if !exams.contains(&e) {
            exams.push(e);
        }
    }
    let steps = exams
        .into_iter()
        .map(|exam| ReferenceStep {
            exam_name: exam.clone(),
            result: disease
                .sample_exam(exam, &mut rng, None, 0.0, &spec.normal_finding)
                .expect("validated exam"),
        })
        .collect();
    CaseRecord {
        inquiry: profile.project_inquiry(),
        reference_trajectory: ReferenceTrajectory {
            exams: steps,
            final_diagnosis: profile.true_diagnosis.clone(),
        },
        profile,
        rubrics: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<CaseRecord>,
    pub eval: Vec<CaseRecord>,
}

/// Stratified, deterministic train/eval partition. Each disease stratum is
/// shuffled with its own stream and eval quotas are assigned by largest
/// remainder so the eval total is `round(n · eval_fraction)`. Both partitions
/// keep the input order.
pub fn split_cases(
    cases: &[CaseRecord],
    fractions: (f64, f64),
    seed: u64,
) -> Result<Split, CohortError> {
    let (train_f, eval_f) = fractions;
    for f in [train_f, eval_f] {
        if !(0.0..=1.0).contains(&f) {
            return config(format!("split fraction {f} outside [0, 1]"));
        }
    }
    if (train_f + eval_f - 1.0).abs() > 1e-9 {
        return config("split fractions must sum to 1");
    }
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in cases.iter().enumerate() {
        strata.entry(c.disease_id()).or_default().push(i);
    }
    let total_eval = (cases.len() as f64 * eval_f).round() as usize;
    let quotas: Vec<(usize, f64)> = strata
        .values()
        .map(|members| {
            let q = members.len() as f64 * eval_f;
            (q.floor() as usize, q - q.floor())
        })
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|(f, _)| *f).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let mut remaining = total_eval.saturating_sub(assigned);
    for &s in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if counts[s] < sizes[s] {
            counts[s] += 1;
            remaining -= 1;
        }
    }

    let mut is_eval = vec![false; cases.len()];
    for ((disease, members), &k) in strata.iter().zip(&counts) {
        let mut shuffled = members.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/{disease}"), 0));
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        for &i in &shuffled[..k] {
            is_eval[i] = true;
        }
    }
    let (eval, train): (Vec<_>, Vec<_>) = cases
        .iter()
        .zip(&is_eval)
        .partition(|(_, &e)| e);
    Ok(Split {
        train: train.into_iter().map(|(c, _)| c.clone()).collect(),
        eval: eval.into_iter().map(|(c, _)| c.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn single_disease(id: &str) -> DiseaseSpec {
        let mut d = builtin_spec().diseases[0].clone();
        d.disease_id = id.into();
        d.diagnosis = id.replace('_', " ");
        d.prior = 1.0;
        d
    }

    #[test]
    fn builtin_is_valid_and_sized() {
        let spec = builtin_spec();
        spec.validate().unwrap();
        assert_eq!(spec.diseases.len(), 6);
        assert_eq!(spec.exam_names().len(), 40);
        assert_eq!(spec.subevent_keys().len(), 24);
    }

    #[test]
    fn single_class_cohort() {
        let mut spec = builtin_spec();
        spec.diseases = vec![single_disease("only")];
        let cases = generate_cohort(&spec, 3, 7, &GenerateOptions::default()).unwrap();
        assert_eq!(cases.len(), 3);
        assert!(cases.iter().all(|c| c.profile.true_diagnosis.canonical == "only"));
        let firsts: HashSet<String> = cases
            .iter()
            .map(|c| {
                let step = c
                    .reference_trajectory
                    .exams
                    .iter()
                    .find(|s| s.result.is_numeric())
                    .unwrap();
                serde_json::to_string(&step.result).unwrap()
            })
            .collect();
        assert_eq!(firsts.len(), 3);
    }

    #[test]
    fn class_balance_within_three_sigma() {
        let mut spec = builtin_spec();
        spec.diseases = vec![single_disease("a"), single_disease("b")];
        spec.diseases[0].prior = 0.5;
        spec.diseases[1].prior = 0.5;
        let cases = generate_cohort(&spec, 10_000, 99, &GenerateOptions::default()).unwrap();
        let a = cases.iter().filter(|c| c.disease_id() == "a").count() as f64;
        // binomial(10000, 0.5): sd = 50
        assert!((a - 5000.0).abs() <= 3.0 * 50.0, "{a}");
    }

    #[test]
    fn deterministic_jsonl() {
        let spec = builtin_spec();
        let a = generate_cohort(&spec, 50, 3, &GenerateOptions::default()).unwrap();
        let b = generate_cohort(&spec, 50, 3, &GenerateOptions::default()).unwrap();
        let enc = |v: &[CaseRecord]| {
            v.iter()
                .map(|c| serde_json::to_string(c).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(enc(&a), enc(&b));
        let c = generate_cohort(&spec, 50, 4, &GenerateOptions::default()).unwrap();
        assert_ne!(enc(&a), enc(&c));
    }

    #[test]
    fn reference_exams_come_from_spec() {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, 300, 5, &GenerateOptions::default()).unwrap();
        for c in &cases {
            let d = spec.disease_for(&c.profile).unwrap();
            let names = c.reference_trajectory.exam_names();
            assert_eq!(&names[..2], ["physical examination", "vital signs"]);
            assert_eq!(names[2..], d.discriminative_exams.iter().map(String::as_str).collect::<Vec<_>>()[..]);
            assert!(names.iter().all(|n| d.has_exam(n)));
            assert_eq!(c.reference_trajectory.final_diagnosis, c.profile.true_diagnosis);
        }
        let none = generate_cohort(&spec, 10, 5, &GenerateOptions { routine_exams: 0 }).unwrap();
        assert!(none.iter().all(|c| c.reference_trajectory.exams.len() == 3));
    }

    #[test]
    fn numeric_moments_match_spec() {
        let mut spec = builtin_spec();
        let mut d = spec.diseases[0].clone();
        d.prior = 1.0;
        spec.diseases = vec![d.clone()];
        let cases = generate_cohort(&spec, 5_000, 21, &GenerateOptions::default()).unwrap();
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for c in &cases {
            for step in &c.reference_trajectory.exams {
                if let ExamResult::NumericPanel { subevents } = &step.result {
                    for s in subevents {
                        values.entry(format!("{}/{}", step.exam_name, s.name)).or_default().push(s.value);
                    }
                }
            }
        }
        assert!(!values.is_empty());
        for (key, v) in values {
            let (exam, sub) = key.split_once('/').unwrap();
            let p = d.subevent(exam, sub).unwrap();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se_mean = p.stddev / n.sqrt();
            assert!((mean - p.mean).abs() < 3.0 * se_mean, "{key} mean {mean}");
            // standard error of the sample sd ≈ σ / sqrt(2(n-1))
            let se_sd = p.stddev / (2.0 * (n - 1.0)).sqrt();
            assert!((var.sqrt() - p.stddev).abs() < 3.0 * se_sd, "{key} sd {}", var.sqrt());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = builtin_spec();
        spec.diseases[0].prior += 0.1;
        assert!(spec.validate().is_err());
        let mut spec = builtin_spec();
        spec.diseases.clear();
        assert!(generate_cohort(&spec, 5, 1, &GenerateOptions::default()).is_err());
        let mut spec = builtin_spec();
        spec.diseases[0].discriminative_exams.push("unknown scan".into());
        assert!(spec.validate().is_err());
        let mut spec = builtin_spec();
        spec.diseases[0]
            .numeric_exam_params
            .values_mut()
            .next()
            .unwrap()[0]
            .stddev = 0.0;
        assert!(spec.validate().is_err());
        assert!(generate_cohort(&builtin_spec(), 0, 1, &GenerateOptions::default()).is_err());
    }

    fn five_by_twenty() -> Vec<CaseRecord> {
        let mut spec = builtin_spec();
        spec.diseases.truncate(5);
        for d in &mut spec.diseases {
            d.prior = 0.2;
        }
        // Force exactly 20 per disease by relabeling round-robin.
        let mut cases = generate_cohort(&spec, 100, 1, &GenerateOptions::default()).unwrap();
        for (i, c) in cases.iter_mut().enumerate() {
            c.profile.cohort_params_ref = Some(spec.diseases[i % 5].disease_id.clone());
        }
        cases
    }

    #[test]
    fn stratified_split() {
        let cases = five_by_twenty();
        let split = split_cases(&cases, (0.8, 0.2), 3).unwrap();
        assert_eq!(split.train.len(), 80);
        assert_eq!(split.eval.len(), 20);
        let mut per: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &split.eval {
            *per.entry(c.disease_id()).or_default() += 1;
        }
        assert!(per.values().all(|&n| n == 4), "{per:?}");

        let all = split_cases(&cases, (1.0, 0.0), 3).unwrap();
        assert!(all.eval.is_empty());
        assert_eq!(all.train.len(), 100);

        let other = split_cases(&cases, (0.8, 0.2), 4).unwrap();
        assert_eq!(other.eval.len(), 20);
        let ids = |v: &[CaseRecord]| v.iter().map(|c| c.case_id().to_string()).collect::<HashSet<_>>();
        assert_ne!(ids(&split.eval), ids(&other.eval));
        assert!(ids(&split.eval).is_disjoint(&ids(&split.train)));
        assert_eq!(split_cases(&cases, (0.8, 0.2), 3).unwrap(), split);

        assert!(split_cases(&cases, (1.2, -0.2), 3).is_err());
        assert!(split_cases(&cases, (0.5, 0.2), 3).is_err());
    }

    #[test]
    fn ar1_pull_toward_mean() {
        let d = DiseaseSpec {
            disease_id: "x".into(),
            diagnosis: "x".into(),
            prior: 1.0,
            numeric_exam_params: BTreeMap::from([(
                "cbc".to_string(),
                vec![SubeventParams {
                    name: "wbc".into(),
                    mean: 15.0,
                    stddev: 1.0,
                    unit: "K/uL".into(),
                }],
            )]),
            text_exam_templates: BTreeMap::new(),
            discriminative_exams: vec![],
            background_templates: BackgroundTemplates::default(),
        };
        let prev = ExamResult::NumericPanel {
            subevents: vec![Subevent {
                name: "wbc".into(),
                value: 17.0,
                unit: "K/uL".into(),
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| match d.sample_exam("cbc", &mut rng, Some(&prev), 0.5, "").unwrap() {
                ExamResult::NumericPanel { subevents } => subevents[0].value,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / n as f64;
        let sd = (1.0f64 - 0.25).sqrt();
        assert!((mean - 16.0).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    }
}
