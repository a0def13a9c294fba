use serde::{Deserialize, Serialize};

use crate::env::{TransitionRecord, TransitionType};
use crate::scoring::{HypothesisSet, ScoringError, Statistician};

use super::ExperimenterError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "lowercase")]
pub enum RewardSignal {
    /// Surprisal under the current hypotheses.
    LogP,
    /// Absolute change in log-likelihood between consecutive hypotheses.
    Alp,
    /// ALP smoothed per transition type with retention `alpha`.
    AlpExp { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardedTransition {
    pub record: TransitionRecord,
    pub reward: f64,
    pub signal: RewardSignal,
}

/// Per-type moving average of ALP, indexed by [`TransitionType::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub m: [f64; 6],
    pub alpha: f64,
}

impl TypeStats {
    pub fn new(alpha: f64) -> Result<Self, ExperimenterError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ExperimenterError::InvalidArgument(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        Ok(TypeStats { m: [0.0; 6], alpha })
    }

    pub fn get(&self, ttype: TransitionType) -> f64 {
        self.m[ttype.index()]
    }
}

/// Surprisal `-log P(change | state, action, h)` in nats.
pub fn reward_logp(
    statistician: &Statistician,
    h: &HypothesisSet,
    record: &TransitionRecord,
) -> Result<f64, ScoringError> {
    Ok(0.0 - statistician.score_record(h, record)?)
}

pub fn reward_alp(
    statistician: &Statistician,
    h_prev: &HypothesisSet,
    h_cur: &HypothesisSet,
    record: &TransitionRecord,
) -> Result<f64, ScoringError> {
    let prev = statistician.score_record(h_prev, record)?;
    let cur = statistician.score_record(h_cur, record)?;
    Ok((prev - cur).abs())
}

/// Smoothed rewards for one batch and the moving averages after it. Each
/// record is rewarded against the averages from before the batch.
pub fn reward_alpexp(
    records: &[TransitionRecord],
    alp: &[f64],
    stats: &TypeStats,
) -> (Vec<f64>, TypeStats) {
    assert_eq!(records.len(), alp.len(), "one ALP value per record");
    let a = stats.alpha;
    let rewards = records
        .iter()
        .zip(alp)
        .map(|(r, &x)| a * stats.get(r.ttype) + (1.0 - a) * x)
        .collect();
    let mut sums = [0.0; 6];
    let mut counts = [0usize; 6];
    for (r, &x) in records.iter().zip(alp) {
        sums[r.ttype.index()] += x;
        counts[r.ttype.index()] += 1;
    }
    let mut next = stats.clone();
    for i in 0..6 {
        if counts[i] > 0 {
            next.m[i] = a * stats.m[i] + (1.0 - a) * (sums[i] / counts[i] as f64);
        }
    }
    (rewards, next)
}

/// Rewards for a whole batch. `stats` is advanced for the smoothed signal and
/// left alone otherwise.
pub fn compute_rewards(
    signal: RewardSignal,
    statistician: &Statistician,
    h_prev: &HypothesisSet,
    h_cur: &HypothesisSet,
    records: &[TransitionRecord],
    stats: &mut TypeStats,
) -> Result<Vec<f64>, ScoringError> {
    let cur = statistician.score_records(h_cur, records)?;
    if signal == RewardSignal::LogP {
        return Ok(cur.into_iter().map(|s| 0.0 - s).collect());
    }
    let prev = statistician.score_records(h_prev, records)?;
    let alp: Vec<f64> = prev.iter().zip(&cur).map(|(p, c)| (p - c).abs()).collect();
    match signal {
        RewardSignal::AlpExp { .. } => {
            let (rewards, next) = reward_alpexp(records, &alp, stats);
            *stats = next;
            Ok(rewards)
        }
        _ => Ok(alp),
    }
}
