use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{OptimizerState, TrainError, TrainerConfig};
use crate::policy::{
    action_distribution, PolicyLayout, PolicyParams, SelectMode, SoftmaxPolicy,
};
use crate::reward::{compute_reward, RewardConfig, SynonymTable};
use crate::seed::derive_seed;
use crate::types::{CaseRecord, EpisodeState, ExamEvent, Trajectory};
use crate::worldmodel::{run_episode, EpisodeConfig, EpisodeError, WorldModelBackend};

/// Shared, read-only inputs of an optimization step.
pub struct GrpoContext<'a> {
    pub layout: Arc<PolicyLayout>,
    pub backend: &'a dyn WorldModelBackend,
    pub table: &'a SynonymTable,
    pub reward: &'a RewardConfig,
    pub cfg: &'a TrainerConfig,
    /// Parameters the KL penalty anchors to.
    pub reference: Option<&'a PolicyParams>,
    pub workers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub mean_reward: f64,
    pub mean_f1: f64,
    pub accuracy: f64,
    pub mean_turns: f64,
    /// Mean negative log-likelihood of the sampled actions.
    pub nll: f64,
    pub entropy: f64,
    pub trajectories: usize,
    pub discarded_groups: usize,
}

/// `(r - mean) / (std + eps)` with the population standard deviation. A
/// group of identical rewards gets exact zeros; the rounding residue of its
/// mean would otherwise be divided by `eps` alone.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    if rewards.iter().all(|r| *r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + eps;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

struct StepRecord {
    features: Vec<f64>,
    action: usize,
    old: Vec<f64>,
}

struct Rollout {
    total: f64,
    f1: f64,
    correct: f64,
    turns: usize,
    steps: Vec<StepRecord>,
}

fn replay(
    layout: &PolicyLayout,
    params: &PolicyParams,
    case: &CaseRecord,
    traj: &Trajectory,
) -> Result<Vec<StepRecord>, TrainError> {
    let mut state = EpisodeState::initial(case.inquiry.clone());
    let mut out = Vec::with_capacity(traj.steps.len());
    for (k, step) in traj.steps.iter().enumerate() {
        let features = layout.features.featurize(&state);
        let action = layout.vocab.index_of(&step.action).ok_or_else(|| {
            TrainError::Config(format!("action {:?} outside the vocabulary", step.action))
        })?;
        let old = action_distribution(params, &features)?;
        out.push(StepRecord { features, action, old });
        if let Some(result) = &step.result {
            let name = match &step.action {
                crate::types::AgentAction::QueryExam { exam_name } => exam_name.as_str(),
                crate::types::AgentAction::Diagnose { .. } => unreachable!("diagnose has no result"),
            };
            let event = ExamEvent::new(name, result.clone(), k + 1)
                .map_err(|e| TrainError::Config(e.to_string()))?;
            state = state
                .append(event)
                .map_err(|e| TrainError::Config(e.to_string()))?;
        }
    }
    Ok(out)
}

fn rollout(
    ctx: &GrpoContext<'_>,
    params: &Arc<PolicyParams>,
    case: &CaseRecord,
    seed: u64,
) -> Result<Option<Rollout>, TrainError> {
    let mut policy = SoftmaxPolicy::new(ctx.layout.clone(), params.clone(), SelectMode::Sample);
    let episode = EpisodeConfig {
        max_turns: ctx.cfg.max_turns,
        seed,
    };
    let traj = match run_episode(&mut policy, ctx.backend, case, &episode) {
        Ok(t) => t,
        Err(EpisodeError::Protocol { partial, .. }) => *partial,
        Err(EpisodeError::Backend(e)) => {
            log::warn!("discarding rollout group for {}: {e}", case.case_id());
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let b = compute_reward(&traj, case, ctx.reward, ctx.table);
    let total = b.total * ctx.reward.gamma.powi(traj.turns_used as i32);
    Ok(Some(Rollout {
        total,
        f1: b.r_exam,
        correct: b.r_diag,
        turns: traj.turns_used,
        steps: replay(&ctx.layout, params, case, &traj)?,
    }))
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Gradient of the clipped surrogate plus entropy bonus minus KL penalty,
/// averaged per trajectory, then over the `G` members of each group and
/// over groups.
fn surrogate_gradient(
    params: &PolicyParams,
    groups: &[Vec<Rollout>],
    advantages: &[Vec<f64>],
    cfg: &TrainerConfig,
    reference: Option<&PolicyParams>,
) -> Result<Vec<f64>, TrainError> {
    let nf = params.n_features;
    let mut grad = vec![0.0; params.weights.len()];
    let group_weight = 1.0 / (groups.len() * cfg.group_size) as f64;
    for (grp, adv) in groups.iter().zip(advantages) {
        for (r, &a) in grp.iter().zip(adv) {
            if r.steps.is_empty() {
                continue;
            }
            let w = group_weight / r.steps.len() as f64;
            for s in &r.steps {
                let p = action_distribution(params, &s.features)?;
                let mut coef = vec![0.0; p.len()];
                let ratio = p[s.action] / s.old[s.action];
                let clipped = (a > 0.0 && ratio > 1.0 + cfg.clip_ratio)
                    || (a < 0.0 && ratio < 1.0 - cfg.clip_ratio);
                if a != 0.0 && !clipped {
                    for (j, pj) in p.iter().enumerate() {
                        let onehot = if j == s.action { 1.0 } else { 0.0 };
                        coef[j] += a * ratio * (onehot - pj);
                    }
                }
                if cfg.entropy_coef > 0.0 {
                    let h = entropy(&p);
                    for (j, pj) in p.iter().enumerate() {
                        if *pj > 0.0 {
                            coef[j] -= cfg.entropy_coef * pj * (pj.ln() + h);
                        }
                    }
                }
                if cfg.kl_coef > 0.0 {
                    let q = action_distribution(reference.expect("checked by caller"), &s.features)?;
                    let log_ratio = log_ratios(&p, &q);
                    let kl: f64 = p.iter().zip(&log_ratio).map(|(pj, l)| pj * l).sum();
                    for (j, pj) in p.iter().enumerate() {
                        coef[j] -= cfg.kl_coef * pj * (log_ratio[j] - kl);
                    }
                }
                for (j, c) in coef.iter().enumerate() {
                    if *c != 0.0 {
                        let row = &mut grad[j * nf..(j + 1) * nf];
                        for (gv, x) in row.iter_mut().zip(&s.features) {
                            *gv += w * c * x;
                        }
                    }
                }
            }
        }
    }
    Ok(grad)
}

fn log_ratios(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(pj, qj)| {
            if *pj > 0.0 {
                pj.ln() - qj.max(f64::MIN_POSITIVE).ln()
            } else {
                0.0
            }
        })
        .collect()
}

/// One optimization step: `group_size` rollouts per case under the current
/// parameters, group-normalized advantages broadcast to every turn, and a
/// clipped-surrogate ascent step per update epoch. A group with any backend
/// failure is dropped from the update.
pub fn grpo_step(
    ctx: &GrpoContext<'_>,
    params: &PolicyParams,
    optimizer: &mut OptimizerState,
    cases: &[CaseRecord],
    step: u64,
) -> Result<(PolicyParams, StepStats), TrainError> {
    let cfg = ctx.cfg;
    if cfg.kl_coef > 0.0 && ctx.reference.is_none() {
        return Err(TrainError::Config("kl_coef > 0 needs reference parameters".into()));
    }
    let g = cfg.group_size;
    let snapshot = Arc::new(params.clone());
    let step_seed = derive_seed(cfg.seed, "rollout", step);
    let results = crate::parallel::map_indexed(ctx.workers, cases.len() * g, |i| {
        let case = &cases[i / g];
        rollout(ctx, &snapshot, case, derive_seed(step_seed, case.case_id(), (i % g) as u64))
    });

    let mut groups: Vec<Vec<Rollout>> = Vec::new();
    let mut discarded = 0;
    let mut iter = results.into_iter();
    for _ in cases {
        let members: Vec<Option<Rollout>> =
            iter.by_ref().take(g).collect::<Result<_, _>>()?;
        match members.into_iter().collect::<Option<Vec<_>>>() {
            Some(m) => groups.push(m),
            None => discarded += 1,
        }
    }
    if groups.is_empty() {
        return Err(TrainError::AllGroupsFailed(step));
    }

    let mut stats = StepStats {
        discarded_groups: discarded,
        ..StepStats::default()
    };
    let mut n_steps = 0usize;
    for r in groups.iter().flatten() {
        stats.trajectories += 1;
        stats.mean_reward += r.total;
        stats.mean_f1 += r.f1;
        stats.accuracy += r.correct;
        stats.mean_turns += r.turns as f64;
        for s in &r.steps {
            stats.nll -= s.old[s.action].max(f64::MIN_POSITIVE).ln();
            stats.entropy += entropy(&s.old);
            n_steps += 1;
        }
    }
    let nt = stats.trajectories as f64;
    stats.mean_reward /= nt;
    stats.mean_f1 /= nt;
    stats.accuracy /= nt;
    stats.mean_turns /= nt;
    stats.nll /= n_steps.max(1) as f64;
    stats.entropy /= n_steps.max(1) as f64;

    let advantages: Vec<Vec<f64>> = groups
        .iter()
        .map(|grp| group_advantages(&grp.iter().map(|r| r.total).collect::<Vec<_>>(), cfg.eps_std))
        .collect();

    let mut next = params.clone();
    for _ in 0..cfg.update_epochs {
        let grad = surrogate_gradient(&next, &groups, &advantages, cfg, ctx.reference)?;
        optimizer.step(&mut next.weights, &grad, cfg.learning_rate)?;
    }
    next.version += 1;
    Ok((next, stats))
}
