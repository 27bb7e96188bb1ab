use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use clinsim_bench::{cohort, gaussian, gaussian_vectors};
use clinsim_core::cohort::builtin_synonyms;
use clinsim_core::distmetrics::{frechet_from_vectors, w1_empirical};
use clinsim_core::policy::{
    ActionVocabulary, PolicyLayout, PolicyParams, ScriptedPolicy, SelectMode, SoftmaxPolicy, UniformRandomPolicy,
};
use clinsim_core::reward::{compute_reward, RewardConfig};
use clinsim_core::trainer::{group_advantages, grpo_step, GrpoContext, OptimizerKind, OptimizerState, TrainerConfig};
use clinsim_core::worldmodel::{run_episode, EpisodeConfig, SyntheticBackend};

fn reward(c: &mut Criterion) {
    let (spec, cases) = cohort(64, 1);
    let table = builtin_synonyms();
    let backend = SyntheticBackend::new(Arc::new(spec));
    let cfg = EpisodeConfig { max_turns: 12, seed: 3 };
    let trajs: Vec<_> = cases
        .iter()
        .map(|case| run_episode(&mut ScriptedPolicy::new(case), &backend, case, &cfg).unwrap())
        .collect();
    let rc = RewardConfig::default();
    c.bench_function("reward/64_trajectories", |b| {
        b.iter(|| {
            trajs
                .iter()
                .zip(&cases)
                .map(|(t, case)| compute_reward(t, case, &rc, &table).total)
                .sum::<f64>()
        })
    });
    let rewards: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
    c.bench_function("reward/group_advantages_g5", |b| b.iter(|| group_advantages(&rewards, 1e-8)));
}

fn metrics(c: &mut Criterion) {
    let a = gaussian(5000, 0.0, 1);
    let b5 = gaussian(5000, 0.5, 2);
    let b3 = gaussian(3000, 0.5, 3);
    c.bench_function("w1/5000_vs_5000", |b| b.iter(|| w1_empirical(&a, &b5)));
    c.bench_function("w1/5000_vs_3000", |b| b.iter(|| w1_empirical(&a, &b3)));
    let x = gaussian_vectors(2000, 8, 4);
    let y = gaussian_vectors(2000, 8, 5);
    c.bench_function("fid/2000x8", |b| b.iter(|| frechet_from_vectors(&x, &y).unwrap()));
    let x = gaussian_vectors(300, 64, 6);
    let y = gaussian_vectors(300, 64, 7);
    c.bench_function("fid/300x64", |b| b.iter(|| frechet_from_vectors(&x, &y).unwrap()));
}

fn episodes(c: &mut Criterion) {
    let (spec, cases) = cohort(100, 2);
    let vocab = Arc::new(ActionVocabulary::from_spec(&spec));
    let backend = SyntheticBackend::new(Arc::new(spec));
    c.bench_function("episode/random_x100", |b| {
        b.iter(|| {
            for (i, case) in cases.iter().enumerate() {
                let cfg = EpisodeConfig { max_turns: 12, seed: i as u64 };
                let mut p = UniformRandomPolicy::new(vocab.clone());
                run_episode(&mut p, &backend, case, &cfg).unwrap();
            }
        })
    });
}

fn grpo(c: &mut Criterion) {
    let (spec, cases) = cohort(64, 3);
    let table = builtin_synonyms();
    let layout = Arc::new(PolicyLayout::from_spec(&spec, 12));
    let backend = SyntheticBackend::new(Arc::new(spec));
    let reward = RewardConfig::default();
    let cfg = TrainerConfig::desk_scale();
    let ctx = GrpoContext {
        layout: layout.clone(),
        backend: &backend,
        table: &table,
        reward: &reward,
        cfg: &cfg,
        reference: None,
        workers: 1,
    };
    let params = PolicyParams::for_layout(&layout);
    let batch = &cases[..cfg.batch_size];
    c.bench_function("grpo/step_batch32_g5", |b| {
        b.iter_batched(
            || OptimizerState::new(OptimizerKind::Adam, params.weights.len()),
            |mut opt| grpo_step(&ctx, &params, &mut opt, batch, 0).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let policy = SoftmaxPolicy::new(layout, Arc::new(params.clone()), SelectMode::Sample);
    let case = &cases[0];
    c.bench_function("episode/softmax_single", |b| {
        b.iter(|| {
            let mut p = policy.clone();
            run_episode(&mut p, &backend, case, &EpisodeConfig { max_turns: 12, seed: 9 }).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = reward, metrics, episodes, grpo
}
criterion_main!(benches);
