use super::{apply_gradient, TrainError};
use crate::policy::{action_distribution, PolicyLayout, PolicyParams};
use crate::types::{AgentAction, CaseRecord};

/// State features paired with the reference action taken there.
#[derive(Debug, Clone, Default)]
pub struct ImitationSet {
    pub samples: Vec<(Vec<f64>, usize)>,
    /// Reference actions outside the vocabulary, which cannot be imitated.
    pub skipped: usize,
}

impl ImitationSet {
    /// One sample per reference step: the prefix state before each exam,
    /// and the full state before the diagnosis.
    pub fn build(layout: &PolicyLayout, cases: &[CaseRecord]) -> Result<Self, TrainError> {
        let mut set = Self::default();
        for case in cases {
            let r = &case.reference_trajectory;
            let n = r.exams.len();
            for k in 0..=n {
                let action = if k < n {
                    AgentAction::query(r.exams[k].exam_name.clone())
                } else {
                    AgentAction::diagnose(r.final_diagnosis.clone())
                };
                let Some(index) = layout.vocab.index_of(&action) else {
                    set.skipped += 1;
                    continue;
                };
                let state = r
                    .prefix_state(&case.inquiry, k)
                    .map_err(|e| TrainError::Config(format!("{}: {e}", case.case_id())))?;
                set.samples.push((layout.features.featurize(&state), index));
            }
        }
        Ok(set)
    }
}

/// One full-batch gradient step on the mean negative log-likelihood.
/// Returns the updated parameters and the loss before the update.
pub fn imitation_step(
    params: &PolicyParams,
    set: &ImitationSet,
    lr: f64,
) -> Result<(PolicyParams, f64), TrainError> {
    if set.samples.is_empty() {
        return Err(TrainError::Config("no imitable reference steps".into()));
    }
    let nf = params.n_features;
    let mut grad = vec![0.0; params.weights.len()];
    let mut nll = 0.0;
    for (f, a) in &set.samples {
        let p = action_distribution(params, f)?;
        nll -= p[*a].max(f64::MIN_POSITIVE).ln();
        for (j, pj) in p.iter().enumerate() {
            let coef = if j == *a { pj - 1.0 } else { *pj };
            if coef != 0.0 {
                let row = &mut grad[j * nf..(j + 1) * nf];
                for (g, x) in row.iter_mut().zip(f) {
                    *g += coef * x;
                }
            }
        }
    }
    let n = set.samples.len() as f64;
    grad.iter_mut().for_each(|g| *g /= -n);
    let mut next = params.clone();
    apply_gradient(&mut next.weights, &grad, lr)?;
    next.version += 1;
    Ok((next, nll / n))
}

/// Builds the sample set for `cases` and takes one step.
pub fn imitation_update(
    params: &PolicyParams,
    layout: &PolicyLayout,
    cases: &[CaseRecord],
    lr: f64,
) -> Result<(PolicyParams, f64), TrainError> {
    imitation_step(params, &ImitationSet::build(layout, cases)?, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{builtin_spec, generate_cohort, GenerateOptions};

    #[test]
    fn loss_decreases_and_gradient_matches_finite_differences() {
        let spec = builtin_spec();
        let layout = PolicyLayout::from_spec(&spec, 12);
        let cases = generate_cohort(&spec, 6, 5, &GenerateOptions::default()).unwrap();
        let set = ImitationSet::build(&layout, &cases).unwrap();
        assert_eq!(set.skipped, 0);
        let mut params = PolicyParams::for_layout(&layout);
        params.weights.iter_mut().enumerate().for_each(|(i, w)| *w = ((i % 7) as f64 - 3.0) * 0.01);

        let loss = |p: &PolicyParams| imitation_step(p, &set, 1e-300).unwrap().1;
        let (next, l0) = imitation_step(&params, &set, 1.0).unwrap();
        // The step direction is -grad scaled by lr = 1.
        for idx in [0usize, 5, params.n_features + 3, params.weights.len() - 1] {
            let h = 1e-6;
            let mut plus = params.clone();
            plus.weights[idx] += h;
            let mut minus = params.clone();
            minus.weights[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let step = next.weights[idx] - params.weights[idx];
            assert!((step + fd).abs() < 1e-6, "idx {idx}: {step} vs {fd}");
        }
        let mut p = params;
        let mut last = l0;
        for _ in 0..20 {
            let (n, l) = imitation_step(&p, &set, 0.5).unwrap();
            assert!(l <= last + 1e-12);
            last = l;
            p = n;
        }
        assert!(last < l0);
    }
}
