//! Evidence collection: scripted oracles and the curiosity rewards used to
//! train the RL experimenter.

mod planner;
mod reward;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Playground, TransitionRecord, TransitionType};
use crate::scoring::ScoringError;

pub use planner::next_action;
pub use reward::{
    compute_rewards, reward_alp, reward_alpexp, reward_logp, RewardSignal, RewardedTransition,
    TypeStats,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimenterError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("oracle made no progress: {0}")]
    Stuck(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Test-set proportions of each transition type, in [`TransitionType::ALL`] order.
pub const TEST_DISTRIBUTION: [usize; 6] = [120, 20, 7, 12, 6, 3];

fn default_thresholds() -> [u32; 2] {
    [133, 266]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OracleKind {
    /// Uniform over legal actions.
    Random,
    /// Produces transitions in test-set proportions.
    Ideal,
    /// Plant script before `thresholds[0]`, small-herbivore script before
    /// `thresholds[1]`, the full script afterwards.
    Curriculum {
        #[serde(default = "default_thresholds")]
        thresholds: [u32; 2],
    },
    /// Repeats the full script: three plants, a small and a big herbivore.
    Hardest,
}

impl OracleKind {
    pub fn curriculum() -> Self {
        OracleKind::Curriculum {
            thresholds: default_thresholds(),
        }
    }

    /// Target sequence the oracle cycles through at `iteration`; empty for
    /// the non-scripted oracles.
    pub fn script(&self, iteration: u32) -> &'static [TransitionType] {
        use TransitionType::*;
        const PLANTS: &[TransitionType] = &[GrowPlant, GrowPlant, GrowPlant];
        const SMALL: &[TransitionType] = &[GrowPlant, GrowSmallHerbivore];
        const FULL: &[TransitionType] = &[
            GrowPlant,
            GrowPlant,
            GrowPlant,
            GrowSmallHerbivore,
            GrowBigHerbivore,
        ];
        match self {
            OracleKind::Random | OracleKind::Ideal => &[],
            OracleKind::Hardest => FULL,
            OracleKind::Curriculum { thresholds } => {
                if iteration < thresholds[0] {
                    PLANTS
                } else if iteration < thresholds[1] {
                    SMALL
                } else {
                    FULL
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionTelemetry {
    pub steps: usize,
    /// Scenes regenerated because the script could not continue.
    pub regenerations: usize,
}

/// Steps an oracle may spend on one target before giving up.
const MAX_STEPS_PER_TARGET: usize = 500;

/// A scripted experimenter. Script position and the ideal oracle's sampling
/// urn persist across calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    kind: OracleKind,
    position: usize,
    urn: Vec<TransitionType>,
    telemetry: CollectionTelemetry,
}

impl Oracle {
    pub fn new(kind: OracleKind) -> Self {
        Oracle {
            kind,
            position: 0,
            urn: Vec::new(),
            telemetry: CollectionTelemetry::default(),
        }
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn telemetry(&self) -> CollectionTelemetry {
        self.telemetry
    }

    /// Collects exactly `n` records.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        env: &mut Playground,
        iteration: u32,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<TransitionRecord>, ExperimenterError> {
        if n == 0 {
            return Err(ExperimenterError::InvalidArgument("n must be at least 1".into()));
        }
        match self.kind {
            OracleKind::Random => self.collect_random(env, n, rng),
            OracleKind::Ideal => self.collect_ideal(env, n, rng),
            _ => self.collect_scripted(env, iteration, n, rng),
        }
    }

    fn collect_random<R: Rng + ?Sized>(
        &mut self,
        env: &mut Playground,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<TransitionRecord>, ExperimenterError> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let action = env
                .legal_actions()
                .choose(rng)
                .cloned()
                .ok_or_else(|| ExperimenterError::Stuck("no legal action".into()))?;
            out.push(env.step(&action)?);
            self.telemetry.steps += 1;
        }
        Ok(out)
    }

    /// Advances the environment until a `target` transition happens, handing
    /// every record to `sink`; stops early when `sink` returns false. Returns
    /// whether the target was produced.
    fn pursue<R: Rng + ?Sized>(
        &mut self,
        env: &mut Playground,
        target: TransitionType,
        rng: &mut R,
        sink: &mut dyn FnMut(TransitionRecord) -> bool,
    ) -> Result<bool, ExperimenterError> {
        let mut fresh = false;
        for _ in 0..MAX_STEPS_PER_TARGET {
            match next_action(env.state(), target, env.config(), rng) {
                Some(action) => {
                    let resets = env.resets();
                    let record = env.step(&action)?;
                    self.telemetry.steps += 1;
                    let hit = record.ttype == target;
                    let more = sink(record);
                    if hit {
                        return Ok(true);
                    }
                    if !more {
                        return Ok(false);
                    }
                    fresh = env.resets() != resets;
                }
                None if fresh => {
                    return Err(ExperimenterError::Stuck(format!(
                        "a fresh scene cannot produce {target}"
                    )));
                }
                None => {
                    env.reset()?;
                    self.telemetry.regenerations += 1;
                    fresh = true;
                }
            }
        }
        Err(ExperimenterError::Stuck(format!(
            "{target} not produced within {MAX_STEPS_PER_TARGET} steps"
        )))
    }

    fn collect_scripted<R: Rng + ?Sized>(
        &mut self,
        env: &mut Playground,
        iteration: u32,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<TransitionRecord>, ExperimenterError> {
        let script = self.kind.script(iteration);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let target = script[self.position % script.len()];
            let done = self.pursue(env, target, rng, &mut |r| {
                out.push(r);
                out.len() < n
            })?;
            if done {
                self.position = (self.position + 1) % script.len();
            }
        }
        Ok(out)
    }

    fn collect_ideal<R: Rng + ?Sized>(
        &mut self,
        env: &mut Playground,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<TransitionRecord>, ExperimenterError> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.urn.is_empty() {
                self.urn = TransitionType::ALL
                    .iter()
                    .zip(TEST_DISTRIBUTION)
                    .flat_map(|(&t, c)| std::iter::repeat_n(t, c))
                    .collect();
                self.urn.shuffle(rng);
            }
            let target = self.urn.pop().expect("refilled above");
            let mut hit = None;
            self.pursue(env, target, rng, &mut |r| {
                if r.ttype == target {
                    hit = Some(r);
                }
                true
            })?;
            out.push(hit.expect("pursue returns after the target transition"));
        }
        Ok(out)
    }
}

/// Count of records per transition type, in [`TransitionType::ALL`] order.
pub fn type_histogram(records: &[TransitionRecord]) -> [usize; 6] {
    let mut counts = [0; 6];
    for r in records {
        counts[r.ttype.index()] += 1;
    }
    counts
}
