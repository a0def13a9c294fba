use rand::Rng;

use super::mlp::{Mlp, Trace};
use super::obs::{ActionMask, ObsVector, N_ACTIONS, OBS_DIM};
use super::RlError;

pub const HIDDEN: usize = 64;

/// Separate actor and critic networks over the same observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub critic: Mlp,
}

/// Action probabilities (zero on masked entries) and the state value.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub probs: [f64; N_ACTIONS],
    pub log_probs: [f64; N_ACTIONS],
    pub value: f64,
}

impl PolicyOutput {
    /// Entropy of the masked distribution.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| -p * l)
            .sum()
    }
}

pub(crate) struct ForwardTrace {
    pub actor: Trace,
    pub critic: Trace,
}

/// Softmax restricted to `mask`; masked entries get probability 0 and log
/// probability negative infinity.
pub fn masked_softmax(
    logits: &[f64],
    mask: &ActionMask,
) -> Result<([f64; N_ACTIONS], [f64; N_ACTIONS]), RlError> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(z, _)| *z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(RlError::EmptyMask);
    }
    let sum: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(z, _)| (z - max).exp())
        .sum();
    let log_norm = max + sum.ln();
    let mut probs = [0.0; N_ACTIONS];
    let mut logs = [f64::NEG_INFINITY; N_ACTIONS];
    for i in 0..N_ACTIONS {
        if mask[i] {
            logs[i] = logits[i] - log_norm;
            probs[i] = logs[i].exp();
        }
    }
    Ok((probs, logs))
}

impl Policy {
    /// Two tanh layers of 64 for both networks; hidden gain sqrt(2), policy
    /// output gain 0.01, value output gain 1.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = 2f64.sqrt();
        let actor = Mlp::new(&[OBS_DIM, HIDDEN, HIDDEN, N_ACTIONS], g, 0.01, rng);
        let critic = Mlp::new(&[OBS_DIM, HIDDEN, HIDDEN, 1], g, 1.0, rng);
        Policy { actor, critic }
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.critic.n_params()
    }

    pub(crate) fn forward_traced(
        &self,
        obs: &ObsVector,
        mask: &ActionMask,
    ) -> Result<(PolicyOutput, ForwardTrace), RlError> {
        let (logits, actor) = self.actor.forward(obs);
        let (value, critic) = self.critic.forward(obs);
        let (probs, log_probs) = masked_softmax(&logits, mask)?;
        Ok((
            PolicyOutput {
                probs,
                log_probs,
                value: value[0],
            },
            ForwardTrace { actor, critic },
        ))
    }

    pub fn forward(&self, obs: &ObsVector, mask: &ActionMask) -> Result<PolicyOutput, RlError> {
        self.forward_traced(obs, mask).map(|(o, _)| o)
    }

    pub fn value(&self, obs: &ObsVector) -> f64 {
        self.critic.forward(obs).0[0]
    }

    /// Draws an action index; never returns a masked entry.
    pub fn sample<R: Rng + ?Sized>(&self, out: &PolicyOutput, rng: &mut R) -> usize {
        sample_index(&out.probs, rng)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64; N_ACTIONS], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = Some(i);
            if u < acc {
                return i;
            }
        }
    }
    last.expect("at least one action has positive probability")
}
