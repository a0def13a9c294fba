//! Hypothesis-guided world modelling for the Playground-Text crafting game.
//!
//! A language-model forward model (the statistician) predicts how each action
//! changes the scene, conditioned on a block of natural-language hypotheses. A
//! second model (the scientist) proposes new hypotheses, accepted or rejected
//! by a Metropolis rule on the statistician's log-likelihood of collected
//! evidence. Evidence comes from scripted oracles or from a masked PPO agent
//! rewarded by surprisal or learning progress.

pub mod env;
pub mod eval;
pub mod experimenter;
pub mod orchestrator;
pub mod par;
pub mod rl;
pub mod scientist;
pub mod scoring;
