//! Clipped-surrogate PPO with generalized advantage estimation and Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::TransitionRecord;
use crate::par::{self, Exec};

use super::obs::{ActionMask, ObsVector, N_ACTIONS};
use super::policy::Policy;
use super::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub clip_range: f64,
    pub n_epochs: usize,
    pub batch_size: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    pub normalize_advantage: bool,
    /// Parallel environments per rollout.
    pub n_envs: usize,
    /// Episodes each environment plays per rollout.
    pub episodes_per_env: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 5e-4,
            clip_range: 0.2,
            n_epochs: 20,
            batch_size: 256,
            vf_coef: 0.5,
            ent_coef: 0.01,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
            normalize_advantage: true,
            n_envs: 15,
            episodes_per_env: 8,
        }
    }
}

/// Generalized advantage estimation over one trajectory. `values` carries one
/// extra bootstrap entry; `dones[t]` marks an episode ending after step `t`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n + 1, "values need a bootstrap entry");
    assert_eq!(dones.len(), n);
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * values[t + 1] - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Experience from `n_envs` environments stepped in lockstep, stored
/// time-major: entry `t * n_envs + e` is step `t` of environment `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub steps_per_env: usize,
    pub obs: Vec<ObsVector>,
    pub masks: Vec<ActionMask>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of each environment's observation after its last step.
    pub last_values: Vec<f64>,
    pub records: Vec<TransitionRecord>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn set_rewards(&mut self, rewards: Vec<f64>) -> Result<(), RlError> {
        if rewards.len() != self.len() {
            return Err(RlError::BufferMismatch(format!(
                "{} rewards for {} steps",
                rewards.len(),
                self.len()
            )));
        }
        self.rewards = rewards;
        Ok(())
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let (n, t_len) = (self.n_envs, self.steps_per_env);
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for e in 0..n {
            let idx: Vec<usize> = (0..t_len).map(|t| t * n + e).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let mut v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            v.push(self.last_values[e]);
            let (a, ret) = gae(&r, &v, &d, gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = a[k];
                self.returns[i] = ret[k];
            }
        }
    }
}

/// One training example for the PPO loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub obs: ObsVector,
    pub mask: ActionMask,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_range: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl From<&PpoConfig> for LossCoefs {
    fn from(c: &PpoConfig) -> Self {
        LossCoefs {
            clip_range: c.clip_range,
            vf_coef: c.vf_coef,
            ent_coef: c.ent_coef,
        }
    }
}

/// Batch means of the loss components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// Negated clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared error of the value head.
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `policy_loss + vf_coef * value_loss - ent_coef * entropy`.
    pub total: f64,
}

impl LossParts {
    fn add(&mut self, o: &LossParts) {
        self.policy_loss += o.policy_loss;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.approx_kl += o.approx_kl;
        self.clip_fraction += o.clip_fraction;
        self.total += o.total;
    }

    fn scale(&mut self, k: f64) {
        self.policy_loss *= k;
        self.value_loss *= k;
        self.entropy *= k;
        self.approx_kl *= k;
        self.clip_fraction *= k;
        self.total *= k;
    }
}

/// Samples per gradient work item. Fixed so the summation order, and with it
/// every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 32;

fn chunk_loss_grad(
    policy: &Policy,
    samples: &[PpoSample],
    coefs: LossCoefs,
    weight: f64,
) -> Result<(LossParts, Vec<f64>), RlError> {
    let na = policy.actor.n_params();
    let mut grad = vec![0.0; policy.n_params()];
    let mut parts = LossParts::default();
    let (lo, hi) = (1.0 - coefs.clip_range, 1.0 + coefs.clip_range);
    for s in samples {
        let (out, trace) = policy.forward_traced(&s.obs, &s.mask)?;
        if !s.mask[s.action] {
            return Err(RlError::BufferMismatch(format!("action {} is masked", s.action)));
        }
        let log_ratio = out.log_probs[s.action] - s.old_log_prob;
        let ratio = log_ratio.exp();
        let surr1 = ratio * s.advantage;
        let surr2 = ratio.clamp(lo, hi) * s.advantage;
        let entropy = out.entropy();
        let verr = out.value - s.ret;

        parts.policy_loss -= weight * surr1.min(surr2);
        parts.value_loss += weight * verr * verr;
        parts.entropy += weight * entropy;
        parts.approx_kl += weight * ((ratio - 1.0) - log_ratio);
        if (ratio - 1.0).abs() > coefs.clip_range {
            parts.clip_fraction += weight;
        }

        let g_logp = if surr1 <= surr2 { -weight * ratio * s.advantage } else { 0.0 };
        let mut d_logits = [0.0; N_ACTIONS];
        for j in 0..N_ACTIONS {
            if s.mask[j] {
                let p = out.probs[j];
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                d_logits[j] = g_logp * (onehot - p)
                    + coefs.ent_coef * weight * p * (out.log_probs[j] + entropy);
            }
        }
        policy.actor.backward(&trace.actor, &d_logits, &mut grad[..na]);
        let d_value = coefs.vf_coef * 2.0 * weight * verr;
        policy.critic.backward(&trace.critic, &[d_value], &mut grad[na..]);
    }
    parts.total =
        parts.policy_loss + coefs.vf_coef * parts.value_loss - coefs.ent_coef * parts.entropy;
    Ok((parts, grad))
}

/// Loss and its gradient with respect to all parameters (actor first, then
/// critic). Advantages are used as given.
pub fn loss_and_grad(
    policy: &Policy,
    samples: &[PpoSample],
    coefs: LossCoefs,
    exec: Exec,
) -> Result<(LossParts, Vec<f64>), RlError> {
    if samples.is_empty() {
        return Err(RlError::BufferMismatch("empty batch".into()));
    }
    let weight = 1.0 / samples.len() as f64;
    let chunks: Vec<&[PpoSample]> = samples.chunks(GRAD_CHUNK).collect();
    let results = par::try_map(exec, &chunks, |c| chunk_loss_grad(policy, c, coefs, weight))?;
    let mut parts = LossParts::default();
    let mut grad = vec![0.0; policy.n_params()];
    for (p, g) in &results {
        parts.add(p);
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((parts, grad))
}

/// Adam with PyTorch's bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn step(&mut self, policy: &mut Policy, grad: &[f64], lr: f64, eps: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step_size = lr / bc1;
        let params = policy
            .actor
            .params_mut()
            .iter_mut()
            .chain(policy.critic.params_mut().iter_mut());
        for (i, p) in params.enumerate() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let denom = (self.v[i].sqrt() / bc2.sqrt()) + eps;
            *p -= step_size * self.m[i] / denom;
        }
    }
}

fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Means over minibatches.
    pub loss: LossParts,
    pub grad_norm: f64,
    pub minibatches: usize,
    pub explained_variance: f64,
    /// The update hit a non-finite loss and was rolled back.
    pub aborted: bool,
}

fn explained_variance(values: &[f64], returns: &[f64]) -> f64 {
    let var = |xs: &mut dyn Iterator<Item = f64>, n: f64| {
        let v: Vec<f64> = xs.collect();
        let mean = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
    };
    let n = returns.len() as f64;
    let var_y = var(&mut returns.iter().copied(), n);
    if var_y == 0.0 {
        return f64::NAN;
    }
    let resid = var(&mut returns.iter().zip(values).map(|(r, v)| r - v), n);
    1.0 - resid / var_y
}

fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    xs.iter_mut().for_each(|x| *x = (*x - mean) / (std + 1e-8));
}

/// Runs `n_epochs` passes of shuffled minibatch updates over a buffer whose
/// advantages have been computed. A non-finite loss or gradient restores the
/// parameters and optimizer state from before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut R,
    exec: Exec,
) -> Result<UpdateStats, RlError> {
    let n = buffer.len();
    if n == 0 || buffer.advantages.len() != n || buffer.returns.len() != n {
        return Err(RlError::BufferMismatch(
            "buffer is empty or advantages were not computed".into(),
        ));
    }
    if adam.m.len() != policy.n_params() {
        return Err(RlError::BufferMismatch("optimizer does not match the policy".into()));
    }
    let saved = (policy.clone(), adam.clone());
    let coefs = LossCoefs::from(config);
    let mut stats = UpdateStats {
        explained_variance: explained_variance(&buffer.values, &buffer.returns),
        ..UpdateStats::default()
    };
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.n_epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut adv: Vec<f64> = batch.iter().map(|&i| buffer.advantages[i]).collect();
            if config.normalize_advantage {
                normalize(&mut adv);
            }
            let samples: Vec<PpoSample> = batch
                .iter()
                .zip(adv)
                .map(|(&i, a)| PpoSample {
                    obs: buffer.obs[i],
                    mask: buffer.masks[i],
                    action: buffer.actions[i],
                    old_log_prob: buffer.log_probs[i],
                    advantage: a,
                    ret: buffer.returns[i],
                })
                .collect();
            let (parts, mut grad) = loss_and_grad(policy, &samples, coefs, exec)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                log::warn!("non-finite PPO loss; keeping the previous parameters");
                (*policy, *adam) = saved;
                return Ok(UpdateStats {
                    aborted: true,
                    ..stats
                });
            }
            stats.grad_norm += clip_grad_norm(&mut grad, config.max_grad_norm);
            adam.step(policy, &grad, config.learning_rate, config.adam_eps);
            stats.loss.add(&parts);
            stats.minibatches += 1;
        }
    }
    let k = 1.0 / stats.minibatches.max(1) as f64;
    stats.loss.scale(k);
    stats.grad_norm *= k;
    Ok(stats)
}
