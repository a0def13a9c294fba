//! Metropolis search over hypothesis sets.
//!
//! Each iteration starts from the previously accepted hypotheses, scores them
//! on the freshly collected evidence, then runs a fixed number of
//! propose/accept steps. Proposals come from the scientist model; a candidate
//! is accepted when `ln u < candidate_score - current_score` with
//! `u ~ U(0, 1)`. Only the likelihood ratio enters the rule (uniform prior,
//! proposal treated as symmetric), and a single chain is kept across iterations.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::TransitionRecord;
use crate::scoring::{
    build_scientist_prompt, generate, GenerationParams, HypothesisSet, PromptTemplates,
    ScorerBackend, ScoringError, Statistician,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScientistError {
    #[error("no evidence to evaluate hypotheses on")]
    NoEvidence,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScientistConfig {
    pub max_tokens: usize,
    pub temperature: f64,
    /// Records of evidence shown in the proposal prompt.
    pub context_budget: usize,
    /// Lowest-scoring records shown as failures of the current hypotheses.
    pub worst_k: usize,
}

impl Default for ScientistConfig {
    fn default() -> Self {
        ScientistConfig {
            max_tokens: 200,
            temperature: 1.0,
            context_budget: 30,
            worst_k: 5,
        }
    }
}

/// The chain's position: current hypotheses and their summed log-likelihood
/// on the evidence the score was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetropolisState {
    pub current: HypothesisSet,
    pub current_score: f64,
}

impl MetropolisState {
    pub fn start(
        statistician: &Statistician,
        hypotheses: HypothesisSet,
        data: &[TransitionRecord],
    ) -> Result<Self, ScientistError> {
        let current_score = evaluate_hypotheses(statistician, &hypotheses, data)?;
        Ok(MetropolisState {
            current: hypotheses,
            current_score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub iteration: u32,
    pub step: u32,
    pub candidate_text: String,
    /// Absent when no usable candidate was generated.
    pub candidate_score: Option<f64>,
    pub score_before: f64,
    pub u: f64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// The acceptance rule.
pub fn metropolis_accepts(u: f64, current_score: f64, candidate_score: f64) -> bool {
    u.ln() < candidate_score - current_score
}

/// Summed log-likelihood of `data` under `hypotheses`. Per-record scores are
/// summed in sorted order so the total does not depend on record order.
pub fn evaluate_hypotheses(
    statistician: &Statistician,
    hypotheses: &HypothesisSet,
    data: &[TransitionRecord],
) -> Result<f64, ScientistError> {
    if data.is_empty() {
        return Err(ScientistError::NoEvidence);
    }
    let mut scores = statistician.score_records(hypotheses, data)?;
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum())
}

/// The `k` records with the lowest score under `hypotheses`; ties keep record order.
pub fn select_worst(
    statistician: &Statistician,
    hypotheses: &HypothesisSet,
    data: &[TransitionRecord],
    k: usize,
) -> Result<Vec<TransitionRecord>, ScientistError> {
    if k == 0 {
        return Err(ScientistError::InvalidArgument("k must be at least 1".into()));
    }
    let scores = statistician.score_records(hypotheses, data)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    Ok(order.into_iter().take(k).map(|i| data[i].clone()).collect())
}

/// The proposal side: an LLM prompted with evidence and the current hypotheses.
pub struct Scientist<'a> {
    backend: &'a dyn ScorerBackend,
    config: ScientistConfig,
    templates: PromptTemplates,
}

impl<'a> Scientist<'a> {
    pub fn new(backend: &'a dyn ScorerBackend, config: ScientistConfig) -> Self {
        Scientist {
            backend,
            config,
            templates: PromptTemplates::v1(),
        }
    }

    pub fn config(&self) -> &ScientistConfig {
        &self.config
    }

    fn propose(
        &self,
        statistician: &Statistician,
        current: &HypothesisSet,
        data: &[TransitionRecord],
        seed: u64,
    ) -> Result<Result<String, String>, ScientistError> {
        let worst = select_worst(statistician, current, data, self.config.worst_k.max(1))?;
        let bundle = build_scientist_prompt(
            &self.templates,
            data,
            current,
            &worst,
            self.config.context_budget,
        );
        let params = GenerationParams {
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
            seed,
        };
        Ok(match generate(self.backend, &bundle, &params) {
            Ok(text) if text.trim().is_empty() => Err("empty generation".to_string()),
            Ok(text) => Ok(text),
            Err(e) => Err(e.to_string()),
        })
    }
}

/// One propose/accept step. The record is returned whether or not the
/// candidate was accepted; a failed generation leaves the state untouched.
pub fn metropolis_step<R: Rng + ?Sized>(
    state: &MetropolisState,
    scientist: &Scientist,
    statistician: &Statistician,
    data: &[TransitionRecord],
    iteration: u32,
    step: u32,
    rng: &mut R,
) -> Result<(MetropolisState, ProposalRecord), ScientistError> {
    let seed: u64 = rng.gen();
    let u: f64 = rng.sample(Open01);
    let mut record = ProposalRecord {
        iteration,
        step,
        candidate_text: String::new(),
        candidate_score: None,
        score_before: state.current_score,
        u,
        accepted: false,
        failure: None,
    };
    let text = match scientist.propose(statistician, &state.current, data, seed)? {
        Ok(text) => text,
        Err(reason) => {
            log::info!("iteration {iteration} step {step}: proposal rejected ({reason})");
            record.failure = Some(reason);
            return Ok((state.clone(), record));
        }
    };
    let candidate = HypothesisSet::with_origin(text.clone(), iteration, step);
    let candidate_score = evaluate_hypotheses(statistician, &candidate, data)?;
    record.candidate_text = text;
    record.candidate_score = Some(candidate_score);
    record.accepted = metropolis_accepts(u, state.current_score, candidate_score);
    let next = if record.accepted {
        MetropolisState {
            current: candidate,
            current_score: candidate_score,
        }
    } else {
        state.clone()
    };
    Ok((next, record))
}

/// Runs `n_steps` Metropolis steps; the final state holds the iteration's hypotheses.
pub fn refine<R: Rng + ?Sized>(
    state: MetropolisState,
    scientist: &Scientist,
    statistician: &Statistician,
    data: &[TransitionRecord],
    n_steps: usize,
    iteration: u32,
    rng: &mut R,
) -> Result<(MetropolisState, Vec<ProposalRecord>), ScientistError> {
    if n_steps == 0 {
        return Err(ScientistError::InvalidArgument("n_steps must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(ScientistError::NoEvidence);
    }
    let mut state = state;
    let mut records = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        let (next, record) =
            metropolis_step(&state, scientist, statistician, data, iteration, step as u32, rng)?;
        state = next;
        records.push(record);
    }
    Ok((state, records))
}
