//! The outer loop: collect evidence, refine hypotheses, evaluate, persist.
//!
//! A run directory holds everything needed to inspect or resume a run:
//!
//! ```text
//! config.snapshot            the TOML config the run was started with
//! checkpoint.json            state after the last completed iteration
//! hypotheses.jsonl           every Metropolis proposal
//! hypotheses_accepted.jsonl  H_t after each iteration
//! iterations.jsonl           one summary line per iteration
//! transitions/t####.jsonl    the evidence the scientist saw at iteration t
//! collection_stats.csv       type histograms of collected and forwarded data
//! eval/####.csv              test-set metrics (0000 is the starting point)
//! summary.csv                per-type AUC, final log-likelihood and accuracy
//! ppo/                       training stats and the latest policy
//! ```

mod export;
mod logs;
mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, RenderStyle, SceneSpec};
use crate::eval::EvalError;
use crate::experimenter::{ExperimenterError, OracleKind, RewardSignal};
use crate::rl::{PpoConfig, RlError};
use crate::scientist::{ScientistConfig, ScientistError};
use crate::scoring::{
    HttpBackend, HttpConfig, ScorerBackend, ScoringError, SyntheticBackend, SyntheticConfig,
};

pub use export::{evaluate_run, export_plot_data};
pub use logs::{AcceptedEntry, Checkpoint, IterationLog};
pub use run::{run, RunOptions, RunOutcome};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("run directory: {0}")]
    RunDir(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log: {0}")]
    Format(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Scientist(#[from] ScientistError),
    #[error(transparent)]
    Experimenter(#[from] ExperimenterError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Who collects the evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimenterSpec {
    Random,
    Ideal,
    Curriculum {
        #[serde(default = "default_thresholds")]
        thresholds: [u32; 2],
    },
    Hardest,
    /// RL agent rewarded by surprisal.
    Logp,
    /// RL agent rewarded by absolute learning progress.
    Alp,
    /// RL agent rewarded by learning progress smoothed per transition type.
    Alpexp {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_thresholds() -> [u32; 2] {
    [133, 266]
}

fn default_alpha() -> f64 {
    0.9
}

impl ExperimenterSpec {
    pub fn oracle(&self) -> Option<OracleKind> {
        Some(match self {
            ExperimenterSpec::Random => OracleKind::Random,
            ExperimenterSpec::Ideal => OracleKind::Ideal,
            ExperimenterSpec::Curriculum { thresholds } => OracleKind::Curriculum {
                thresholds: *thresholds,
            },
            ExperimenterSpec::Hardest => OracleKind::Hardest,
            _ => return None,
        })
    }

    pub fn signal(&self) -> Option<RewardSignal> {
        match self {
            ExperimenterSpec::Logp => Some(RewardSignal::LogP),
            ExperimenterSpec::Alp => Some(RewardSignal::Alp),
            ExperimenterSpec::Alpexp { alpha } => Some(RewardSignal::AlpExp { alpha: *alpha }),
            _ => None,
        }
    }
}

/// Backend shared by the statistician and the scientist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Synthetic(SyntheticConfig),
    Http(HttpConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Synthetic(SyntheticConfig::default())
    }
}

impl BackendSpec {
    pub fn build(&self, env: &EnvConfig) -> Result<Box<dyn ScorerBackend>, ScoringError> {
        Ok(match self {
            BackendSpec::Synthetic(c) => Box::new(SyntheticBackend::new(c.clone(), env.clone())),
            BackendSpec::Http(c) => Box::new(HttpBackend::new(c.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Outer-loop iterations.
    pub iterations: u32,
    /// Metropolis steps per iteration.
    pub n_steps: usize,
    /// Transitions the scientist sees per iteration.
    pub collect_n: usize,
    /// Transitions an RL experimenter collects per iteration; the last
    /// `collect_n` of them are forwarded.
    pub rl_collect_n: usize,
    /// Test-set evaluation cadence; the final iteration is always evaluated.
    pub eval_every: u32,
    pub seed: u64,
    pub testset_seed: u64,
    pub style: RenderStyle,
    /// Hypotheses the run starts from.
    pub initial_hypotheses: String,
    /// Skip hypothesis refinement, keeping `initial_hypotheses` throughout.
    pub freeze_hypotheses: bool,
    /// Also show the scientist the evidence of this many previous
    /// iterations; 0 keeps it strictly online.
    pub replay_iterations: usize,
    pub experimenter: ExperimenterSpec,
    pub scientist: ScientistConfig,
    pub env: EnvConfig,
    pub scene: SceneSpec,
    pub backend: BackendSpec,
    pub ppo: PpoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 400,
            n_steps: 5,
            collect_n: 150,
            rl_collect_n: 3600,
            eval_every: 10,
            seed: 0,
            testset_seed: 4242,
            style: RenderStyle::Standard,
            initial_hypotheses: String::new(),
            freeze_hypotheses: false,
            replay_iterations: 0,
            experimenter: ExperimenterSpec::Curriculum {
                thresholds: default_thresholds(),
            },
            scientist: ScientistConfig::default(),
            env: EnvConfig::default(),
            scene: SceneSpec::default(),
            backend: BackendSpec::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, OrchestratorError> {
        toml::to_string(self).map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    pub fn is_rl(&self) -> bool {
        self.experimenter.signal().is_some()
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.n_steps == 0 && !self.freeze_hypotheses {
            return bad("n_steps must be at least 1".into());
        }
        if self.collect_n == 0 {
            return bad("collect_n must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.rl_collect_n < self.collect_n {
            return bad(format!(
                "rl_collect_n ({}) must be at least collect_n ({})",
                self.rl_collect_n, self.collect_n
            ));
        }
        if let ExperimenterSpec::Alpexp { alpha } = self.experimenter {
            if !(0.0..=1.0).contains(&alpha) {
                return bad(format!("alpha must lie in [0, 1], got {alpha}"));
            }
        }
        if self.is_rl() {
            let per_rollout = self.ppo.n_envs * self.ppo.episodes_per_env * self.env.episode_len;
            if per_rollout != self.rl_collect_n {
                return bad(format!(
                    "rl_collect_n ({}) must equal n_envs × episodes_per_env × episode_len ({per_rollout})",
                    self.rl_collect_n
                ));
            }
        }
        Ok(())
    }
}

/// Independent seed for one purpose at one iteration.
pub fn derive_seed(seed: u64, iteration: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ iteration) ^ stream)
}

#[cfg(test)]
mod tests;
