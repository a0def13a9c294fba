//! Sequential vs rayon execution of the three fan-out points: test-set
//! scoring, environment rollouts and the PPO gradient.
//!
//! Built with `--no-default-features` both variants run sequentially, which
//! makes the fallback's overhead visible too.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use worldllm::env::{EnvConfig, RenderStyle, SceneSpec};
use worldllm::eval::{eval_loglik, TestSet};
use worldllm::par::Exec;
use worldllm::rl::{collect_rollouts, loss_and_grad, LossCoefs, Policy, PpoConfig, PpoSample};
use worldllm::rl::{N_ACTIONS, OBS_DIM};
use worldllm::scoring::{
    GenerationParams, HypothesisSet, PromptBundle, ScoredContinuation, ScorerBackend,
    ScoringError, Statistician, SyntheticBackend,
};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

/// The synthetic scorer plus a fixed per-request delay, standing in for a
/// network round trip.
struct Delayed(SyntheticBackend, Duration);

impl ScorerBackend for Delayed {
    fn score(&self, bundle: &PromptBundle) -> Result<ScoredContinuation, ScoringError> {
        std::thread::sleep(self.1);
        self.0.score(bundle)
    }
    fn generate(&self, b: &PromptBundle, p: &GenerationParams) -> Result<String, ScoringError> {
        self.0.generate(b, p)
    }
    fn name(&self) -> &str {
        "delayed"
    }
}

fn testset_scoring(c: &mut Criterion) {
    let ts = TestSet::build(1, &EnvConfig::default(), &SceneSpec::default()).unwrap();
    let h = HypothesisSet::new("When you go to an object, you are standing on it.");
    let mut group = c.benchmark_group("testset_scoring");
    for (label, backend) in [
        ("synthetic", Box::new(SyntheticBackend::default()) as Box<dyn ScorerBackend>),
        ("latency_200us", Box::new(Delayed(SyntheticBackend::default(), Duration::from_micros(200)))),
    ] {
        for (name, exec) in MODES {
            let st = Statistician::new(backend.as_ref()).with_exec(exec);
            group.bench_with_input(BenchmarkId::new(label, name), &exec, |b, _| {
                b.iter(|| {
                    st.clear_cache();
                    eval_loglik(&st, &h, &ts).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let policy = Policy::new(&mut ChaCha8Rng::seed_from_u64(2));
    let env = EnvConfig::default();
    let scene = SceneSpec::default();
    let cfg = PpoConfig::default();
    let mut group = c.benchmark_group("rollouts_3600");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| collect_rollouts(&policy, &env, &scene, RenderStyle::Standard, &cfg, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn ppo_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = Policy::new(&mut rng);
    let samples: Vec<PpoSample> = (0..3600)
        .map(|k| {
            let mut obs = [0.0; OBS_DIM];
            obs.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            let mut mask = [true; N_ACTIONS];
            mask[k % N_ACTIONS] = false;
            let action = (k + 1) % N_ACTIONS;
            PpoSample {
                obs,
                mask,
                action,
                old_log_prob: -2.0,
                advantage: rng.gen_range(-1.0..1.0),
                ret: rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    let coefs = LossCoefs::from(&PpoConfig::default());
    let mut group = c.benchmark_group("ppo_gradient");
    for batch in [256, 3600] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, batch), &batch, |b, &n| {
                b.iter(|| loss_and_grad(&policy, &samples[..n], coefs, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, testset_scoring, rollouts, ppo_gradient);
criterion_main!(benches);
