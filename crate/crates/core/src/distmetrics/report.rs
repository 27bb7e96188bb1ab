use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::frechet::{frechet_distance, intra_diversity};
use super::numeric::{exam_normalized_variance, exam_wasserstein1, NumericSample};
use super::MetricError;
use crate::eval::table::render_rows;
use crate::parallel::map_indexed;
use crate::seed::derive_seed;
use crate::types::{normalize_term, CaseRecord, ExamResult};
use crate::worldmodel::{WorldModelBackend, WorldModelError};

/// One world-model output for an exam the case's reference performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedExam {
    pub case_id: String,
    pub exam_name: String,
    pub result: ExamResult,
}

/// Queries every reference exam of every case against an empty history, so
/// each result is conditioned on the profile alone. Generation `k` of case
/// `c` uses seed `derive_seed(seed, c, k)`.
pub fn first_step_generations(
    backend: &dyn WorldModelBackend,
    cases: &[CaseRecord],
    seed: u64,
    workers: usize,
) -> Result<Vec<GeneratedExam>, (String, WorldModelError)> {
    let per_case = map_indexed(workers, cases.len(), |i| {
        let case = &cases[i];
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for step in &case.reference_trajectory.exams {
            let exam = normalize_term(&step.exam_name);
            if !seen.insert(exam.clone()) {
                continue;
            }
            let s = derive_seed(seed, case.case_id(), out.len() as u64);
            let result = backend
                .generate(&case.profile, &[], &exam, s)
                .map_err(|e| (case.case_id().to_string(), e))?;
            out.push(GeneratedExam {
                case_id: case.case_id().to_string(),
                exam_name: exam,
                result,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in per_case {
        all.extend(r?);
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExamDistConfig {
    /// Exams with fewer reference occurrences are excluded.
    pub min_count: usize,
    pub workers: usize,
}

impl Default for ExamDistConfig {
    fn default() -> Self {
        Self {
            min_count: 50,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExamKind {
    Numeric,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamDistRow {
    pub exam: String,
    pub kind: ExamKind,
    pub n_ref: usize,
    pub n_gen: usize,
    /// Generated results of the other kind, left out of the metrics.
    pub n_kind_mismatch: usize,
    pub normalized_variance_gen: Option<f64>,
    pub normalized_variance_ref: Option<f64>,
    pub wasserstein: Option<f64>,
    pub diversity_gen: Option<f64>,
    pub diversity_ref: Option<f64>,
    pub fid: Option<f64>,
    pub skipped_subevents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExamDistSummary {
    pub normalized_variance_gen: Option<f64>,
    pub normalized_variance_ref: Option<f64>,
    pub wasserstein: Option<f64>,
    pub diversity_gen: Option<f64>,
    pub diversity_ref: Option<f64>,
    pub fid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedExam {
    pub exam: String,
    pub n_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamDistReport {
    pub min_count: usize,
    pub embedder: String,
    pub rows: Vec<ExamDistRow>,
    pub excluded: Vec<ExcludedExam>,
    pub summary: ExamDistSummary,
}

/// Per-subevent samples in order of first appearance. Units must be uniform
/// within a subevent.
fn numeric_samples(exam: &str, results: &[&ExamResult]) -> Result<Vec<NumericSample>, MetricError> {
    let mut samples: Vec<NumericSample> = Vec::new();
    for r in results {
        let ExamResult::NumericPanel { subevents } = r else { continue };
        for s in subevents {
            match samples.iter_mut().find(|x| x.subevent == s.name) {
                Some(x) if x.unit != s.unit => {
                    return Err(MetricError::UnitMismatch {
                        subevent: format!("{exam}/{}", s.name),
                        gen: s.unit.clone(),
                        reference: x.unit.clone(),
                    })
                }
                Some(x) => x.values.push(s.value),
                None => samples.push(NumericSample::new(exam, &s.name, vec![s.value], &s.unit)),
            }
        }
    }
    Ok(samples)
}

fn exam_row(
    exam: &str,
    gen: &[&ExamResult],
    reference: &[&ExamResult],
    embedder: &dyn Embedder,
) -> Result<ExamDistRow, MetricError> {
    let kind = if reference.iter().all(|r| r.is_numeric()) {
        ExamKind::Numeric
    } else {
        ExamKind::Text
    };
    let matching: Vec<&ExamResult> = gen
        .iter()
        .copied()
        .filter(|g| g.is_numeric() == (kind == ExamKind::Numeric))
        .collect();
    let mut row = ExamDistRow {
        exam: exam.to_string(),
        kind,
        n_ref: reference.len(),
        n_gen: matching.len(),
        n_kind_mismatch: gen.len() - matching.len(),
        normalized_variance_gen: None,
        normalized_variance_ref: None,
        wasserstein: None,
        diversity_gen: None,
        diversity_ref: None,
        fid: None,
        skipped_subevents: Vec::new(),
    };
    match kind {
        ExamKind::Numeric => {
            let r = numeric_samples(exam, reference)?;
            let nv_ref = exam_normalized_variance(&r)?;
            row.normalized_variance_ref = nv_ref.value;
            row.skipped_subevents.extend(nv_ref.skipped);
            if !matching.is_empty() {
                let g = numeric_samples(exam, &matching)?;
                let nv_gen = exam_normalized_variance(&g)?;
                let w1 = exam_wasserstein1(&g, &r)?;
                row.normalized_variance_gen = nv_gen.value;
                row.wasserstein = w1.value;
                row.skipped_subevents.extend(nv_gen.skipped);
                row.skipped_subevents.extend(w1.skipped);
            }
        }
        ExamKind::Text => {
            let texts = |rs: &[&ExamResult]| rs.iter().map(|r| r.render()).collect::<Vec<_>>();
            let (rt, gt) = (texts(reference), texts(&matching));
            let r = embedder.embed_set(&rt.iter().map(String::as_str).collect::<Vec<_>>())?;
            row.diversity_ref = intra_diversity(&r).ok();
            if !gt.is_empty() {
                let g = embedder.embed_set(&gt.iter().map(String::as_str).collect::<Vec<_>>())?;
                row.diversity_gen = intra_diversity(&g).ok();
                row.fid = Some(frechet_distance(&g, &r)?);
            }
        }
    }
    row.skipped_subevents.sort();
    row.skipped_subevents.dedup();
    Ok(row)
}

fn mean_of(rows: &[ExamDistRow], f: impl Fn(&ExamDistRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(f).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Compares generated first-step results with the reference results of the
/// same cases, exam by exam. Generated results for (case, exam) pairs absent
/// from the reference are ignored.
pub fn exam_dist_report(
    generated: &[GeneratedExam],
    reference: &[CaseRecord],
    embedder: &dyn Embedder,
    cfg: &ExamDistConfig,
) -> Result<ExamDistReport, MetricError> {
    let mut refs: BTreeMap<String, Vec<&ExamResult>> = BTreeMap::new();
    let mut performed: BTreeSet<(&str, String)> = BTreeSet::new();
    for case in reference {
        let mut seen = BTreeSet::new();
        for step in &case.reference_trajectory.exams {
            let exam = normalize_term(&step.exam_name);
            if seen.insert(exam.clone()) {
                refs.entry(exam.clone()).or_default().push(&step.result);
                performed.insert((case.case_id(), exam));
            }
        }
    }
    let mut gens: BTreeMap<String, Vec<&ExamResult>> = BTreeMap::new();
    for g in generated {
        let exam = normalize_term(&g.exam_name);
        if performed.contains(&(g.case_id.as_str(), exam.clone())) {
            gens.entry(exam).or_default().push(&g.result);
        }
    }
    let (kept, dropped): (Vec<_>, Vec<_>) = refs.into_iter().partition(|(_, r)| r.len() >= cfg.min_count);
    let rows = map_indexed(cfg.workers, kept.len(), |i| {
        let (exam, r) = &kept[i];
        let g = gens.get(exam).map_or(&[][..], Vec::as_slice);
        exam_row(exam, g, r, embedder)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let summary = ExamDistSummary {
        normalized_variance_gen: mean_of(&rows, |r| r.normalized_variance_gen),
        normalized_variance_ref: mean_of(&rows, |r| r.normalized_variance_ref),
        wasserstein: mean_of(&rows, |r| r.wasserstein),
        diversity_gen: mean_of(&rows, |r| r.diversity_gen),
        diversity_ref: mean_of(&rows, |r| r.diversity_ref),
        fid: mean_of(&rows, |r| r.fid),
    };
    Ok(ExamDistReport {
        min_count: cfg.min_count,
        embedder: embedder.provenance(),
        excluded: dropped
            .into_iter()
            .map(|(exam, r)| ExcludedExam { exam, n_ref: r.len() })
            .collect(),
        rows,
        summary,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn pair(gen: Option<f64>, reference: Option<f64>) -> String {
    format!("{} ({})", cell(gen), cell(reference))
}

/// One row per exam plus a mean row. Variance and diversity cells read
/// `generated (reference)`.
pub fn exam_dist_table(report: &ExamDistReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.exam.clone(),
                r.n_gen.to_string(),
                pair(r.normalized_variance_gen, r.normalized_variance_ref),
                cell(r.wasserstein),
                pair(r.diversity_gen, r.diversity_ref),
                cell(r.fid),
            ]
        })
        .collect();
    let s = &report.summary;
    rows.push(vec![
        "mean".into(),
        String::new(),
        pair(s.normalized_variance_gen, s.normalized_variance_ref),
        cell(s.wasserstein),
        pair(s.diversity_gen, s.diversity_ref),
        cell(s.fid),
    ]);
    render_rows(
        &["Exam", "N", "Normalized Variance", "Wasserstein Distance", "LPIPS", "FID"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{builtin_spec, generate_cohort, GenerateOptions};
    use crate::distmetrics::HashedEmbedder;
    use crate::worldmodel::SyntheticBackend;
    use std::sync::Arc;

    fn setup(n: usize) -> (Vec<CaseRecord>, SyntheticBackend) {
        let spec = builtin_spec();
        let cases = generate_cohort(&spec, n, 21, &GenerateOptions::default()).unwrap();
        (cases, SyntheticBackend::new(Arc::new(spec)))
    }

    #[test]
    fn synthetic_backend_fits_reference() {
        let (cases, backend) = setup(600);
        let gen = first_step_generations(&backend, &cases, 1, 2).unwrap();
        let report = exam_dist_report(&gen, &cases, &HashedEmbedder::default(), &ExamDistConfig::default()).unwrap();
        assert!(!report.rows.is_empty());
        for row in &report.rows {
            assert_eq!(row.n_gen, row.n_ref, "{}", row.exam);
            if let Some(w) = row.wasserstein {
                assert!(w < 0.3, "{}: {w}", row.exam);
            }
        }
        assert!(report.summary.wasserstein.is_some());
        assert!(report.summary.fid.is_some());
        let table = exam_dist_table(&report);
        assert!(table.lines().count() == report.rows.len() + 3);
    }

    #[test]
    fn shifted_generator_scores_worse() {
        let (cases, backend) = setup(300);
        let mut gen = first_step_generations(&backend, &cases, 1, 1).unwrap();
        let base = exam_dist_report(&gen, &cases, &HashedEmbedder::default(), &ExamDistConfig::default()).unwrap();
        for g in &mut gen {
            if let ExamResult::NumericPanel { subevents } = &mut g.result {
                subevents.iter_mut().for_each(|s| s.value *= 1.5);
            }
        }
        let shifted = exam_dist_report(&gen, &cases, &HashedEmbedder::default(), &ExamDistConfig::default()).unwrap();
        assert!(shifted.summary.wasserstein.unwrap() > base.summary.wasserstein.unwrap());
    }

    #[test]
    fn min_count_excludes() {
        let (cases, backend) = setup(20);
        let gen = first_step_generations(&backend, &cases, 1, 1).unwrap();
        let report = exam_dist_report(&gen, &cases, &HashedEmbedder::default(), &ExamDistConfig::default()).unwrap();
        assert!(report.rows.is_empty());
        assert!(!report.excluded.is_empty());
    }

    #[test]
    fn worker_invariant() {
        let (cases, backend) = setup(200);
        let gen1 = first_step_generations(&backend, &cases, 4, 1).unwrap();
        let gen4 = first_step_generations(&backend, &cases, 4, 4).unwrap();
        assert_eq!(gen1, gen4);
        let cfg = |workers| ExamDistConfig { min_count: 10, workers };
        let e = HashedEmbedder::default();
        assert_eq!(
            exam_dist_report(&gen1, &cases, &e, &cfg(1)).unwrap(),
            exam_dist_report(&gen4, &cases, &e, &cfg(3)).unwrap()
        );
    }
}
