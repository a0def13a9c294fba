//! Masked PPO over symbolic observations, written from scratch.

mod checkpoint;
mod mlp;
mod obs;
mod policy;
mod ppo;
mod rollout;

use thiserror::Error;

use crate::env::EnvError;

pub use checkpoint::{
    from_tensors, load_checkpoint, read_tensors, save_checkpoint, to_tensors, write_tensors,
    Tensor,
};
pub use mlp::Mlp;
pub use obs::{
    action_mask, encode_obs, head_index, to_action, ActionMask, ObsVector, GRASP, N_ACTIONS,
    OBS_DIM, RELEASE_ALL, RELEASE_PLANT, RELEASE_WATER,
};
pub use policy::{masked_softmax, Policy, PolicyOutput, HIDDEN};
pub use ppo::{
    gae, loss_and_grad, ppo_update, Adam, LossCoefs, LossParts, PpoConfig, PpoSample,
    RolloutBuffer, UpdateStats,
};
pub use rollout::collect_rollouts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("no legal action in the mask")]
    EmptyMask,
    #[error("buffer mismatch: {0}")]
    BufferMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}
