use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionConstraint, Policy, PolicyError, PolicyLayout};
use crate::types::{AgentAction, EpisodeState};

/// Row-major `n_actions x n_features` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub n_actions: usize,
    pub n_features: usize,
    pub weights: Vec<f64>,
    /// Number of updates applied since initialization.
    pub version: u64,
}

impl PolicyParams {
    pub fn zeros(n_actions: usize, n_features: usize) -> Self {
        Self {
            n_actions,
            n_features,
            weights: vec![0.0; n_actions * n_features],
            version: 0,
        }
    }

    pub fn for_layout(layout: &PolicyLayout) -> Self {
        Self::zeros(layout.n_actions(), layout.n_features())
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.weights[action * self.n_features..(action + 1) * self.n_features]
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if self.weights.len() != self.n_actions * self.n_features {
            return Err(PolicyError::Dimension(format!(
                "{} weights for {}x{}",
                self.weights.len(),
                self.n_actions,
                self.n_features
            )));
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if features.len() != self.n_features {
            return Err(PolicyError::Dimension(format!(
                "{} features, expected {}",
                features.len(),
                self.n_features
            )));
        }
        Ok((0..self.n_actions)
            .map(|a| self.row(a).iter().zip(features).map(|(w, x)| w * x).sum())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Greedy,
    Sample,
}

fn softmax(logits: &[f64], allowed: impl Fn(usize) -> bool) -> Result<Vec<f64>, PolicyError> {
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(PolicyError::NonFinite(i));
    }
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(PolicyError::NoAction("constraint excludes every action".into()));
    }
    let mut p: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if allowed(i) { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

/// Softmax over all actions.
pub fn action_distribution(params: &PolicyParams, features: &[f64]) -> Result<Vec<f64>, PolicyError> {
    softmax(&params.logits(features)?, |_| true)
}

/// Softmax restricted to the actions `constraint` admits; the rest get
/// probability zero.
pub fn masked_distribution(
    params: &PolicyParams,
    layout: &PolicyLayout,
    features: &[f64],
    constraint: ActionConstraint,
) -> Result<Vec<f64>, PolicyError> {
    let vocab = &layout.vocab;
    softmax(&params.logits(features)?, |i| constraint.allows(vocab.is_diagnose(i)))
}

/// Greedy picks the lowest-index maximum; sampling draws one categorical
/// variate from a generator seeded with `seed`.
pub fn select_index(dist: &[f64], mode: SelectMode, seed: u64) -> usize {
    match mode {
        SelectMode::Greedy => {
            let mut best = 0;
            for (i, &p) in dist.iter().enumerate() {
                if p > dist[best] {
                    best = i;
                }
            }
            best
        }
        SelectMode::Sample => {
            let u: f64 = ChaCha8Rng::seed_from_u64(seed).random();
            let mut acc = 0.0;
            let mut last = 0;
            for (i, &p) in dist.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    last = i;
                    if u < acc {
                        return i;
                    }
                }
            }
            last
        }
    }
}

pub fn select_action(
    params: &PolicyParams,
    layout: &PolicyLayout,
    state: &EpisodeState,
    mode: SelectMode,
    seed: u64,
    constraint: ActionConstraint,
) -> Result<(usize, AgentAction), PolicyError> {
    let f = layout.features.featurize(state);
    let dist = masked_distribution(params, layout, &f, constraint)?;
    let i = select_index(&dist, mode, seed);
    Ok((i, layout.vocab.action(i)))
}

/// Linear softmax policy over a fixed parameter snapshot.
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    pub layout: Arc<PolicyLayout>,
    pub params: Arc<PolicyParams>,
    pub mode: SelectMode,
}

impl SoftmaxPolicy {
    pub fn new(layout: Arc<PolicyLayout>, params: Arc<PolicyParams>, mode: SelectMode) -> Self {
        Self { layout, params, mode }
    }
}

impl Policy for SoftmaxPolicy {
    fn act(
        &mut self,
        state: &EpisodeState,
        seed: u64,
        constraint: ActionConstraint,
    ) -> Result<AgentAction, PolicyError> {
        select_action(&self.params, &self.layout, state, self.mode, seed, constraint).map(|(_, a)| a)
    }
}
