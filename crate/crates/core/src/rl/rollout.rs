use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvConfig, Playground, RenderStyle, SceneSpec, TransitionRecord};
use crate::par::{self, Exec};

use super::obs::{action_mask, encode_obs, to_action, ActionMask, ObsVector};
use super::policy::Policy;
use super::ppo::{PpoConfig, RolloutBuffer};
use super::RlError;

struct Step {
    obs: ObsVector,
    mask: ActionMask,
    action: usize,
    log_prob: f64,
    value: f64,
    done: bool,
    record: TransitionRecord,
}

struct Worker {
    env: Playground,
    rng: ChaCha8Rng,
}

fn run_worker(
    worker: &mut Worker,
    policy: &Policy,
    steps: usize,
) -> Result<(Vec<Step>, f64), RlError> {
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let state = worker.env.state().clone();
        let obs = encode_obs(&state);
        let mask = action_mask(&state, worker.env.config());
        let pout = policy.forward(&obs, &mask)?;
        let action = policy.sample(&pout, &mut worker.rng);
        let concrete = to_action(&state, worker.env.config(), action)
            .expect("masked-in head actions map to a legal action");
        let resets = worker.env.resets();
        let record = worker.env.step(&concrete)?;
        out.push(Step {
            obs,
            mask,
            action,
            log_prob: pout.log_probs[action],
            value: pout.value,
            done: worker.env.resets() != resets,
            record,
        });
    }
    let last_value = policy.value(&encode_obs(worker.env.state()));
    Ok((out, last_value))
}

/// Plays `n_envs × episodes_per_env` episodes with fresh scenes, the
/// environments running concurrently with their own seeded generators.
/// Rewards are left at zero for the caller to fill in.
pub fn collect_rollouts(
    policy: &Policy,
    env_config: &EnvConfig,
    scene: &SceneSpec,
    style: RenderStyle,
    config: &PpoConfig,
    seed: u64,
    exec: Exec,
) -> Result<RolloutBuffer, RlError> {
    let n_envs = config.n_envs;
    let steps = config.episodes_per_env * env_config.episode_len;
    if n_envs == 0 || steps == 0 {
        return Err(RlError::BufferMismatch("rollout would be empty".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut workers = Vec::with_capacity(n_envs);
    for _ in 0..n_envs {
        workers.push(Worker {
            env: Playground::new(env_config.clone(), scene.clone(), style, master.gen())?,
            rng: ChaCha8Rng::seed_from_u64(master.gen()),
        });
    }
    let results = par::map_mut(exec, &mut workers, |w| run_worker(w, policy, steps));
    let mut per_env = Vec::with_capacity(n_envs);
    let mut last_values = Vec::with_capacity(n_envs);
    for r in results {
        let (s, v) = r?;
        per_env.push(s.into_iter());
        last_values.push(v);
    }
    let total = n_envs * steps;
    let mut buf = RolloutBuffer {
        n_envs,
        steps_per_env: steps,
        obs: Vec::with_capacity(total),
        masks: Vec::with_capacity(total),
        actions: Vec::with_capacity(total),
        log_probs: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
        rewards: vec![0.0; total],
        dones: Vec::with_capacity(total),
        last_values,
        records: Vec::with_capacity(total),
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    for _ in 0..steps {
        for it in per_env.iter_mut() {
            let s = it.next().expect("every worker ran the same number of steps");
            buf.obs.push(s.obs);
            buf.masks.push(s.mask);
            buf.actions.push(s.action);
            buf.log_probs.push(s.log_prob);
            buf.values.push(s.value);
            buf.dones.push(s.done);
            buf.records.push(s.record);
        }
    }
    Ok(buf)
}
