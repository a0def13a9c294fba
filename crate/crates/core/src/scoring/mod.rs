//! Sequence scoring and generation behind a pluggable backend.
//!
//! The statistician needs the log-probability of a change sentence following a
//! prompt; the scientist needs free-form generation. [`ScorerBackend`] covers
//! both. [`SyntheticBackend`] is a deterministic stand-in that reads prompts
//! like a model would; [`HttpBackend`] talks to any OpenAI-compatible
//! completion endpoint that can echo prompt log-probabilities.

mod http;
mod prompt;
mod statistician;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, ResponseFields};
pub use prompt::{
    build_scientist_prompt, build_statistician_prompt, fill, render_transition_block,
    select_context, PromptBundle, PromptTemplates, EMPTY_SLOT, HYPOTHESIS_CLAUSE,
};
pub use statistician::Statistician;
pub use synthetic::{canonical_rule, covers, SyntheticBackend, SyntheticConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response lacks log-probabilities: {0}")]
    MissingLogprobs(String),
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("giving up after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: String },
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
}

/// Summed log-probability (nats) of a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredContinuation {
    pub total_logprob: f64,
    pub token_count: usize,
}

impl ScoredContinuation {
    /// Per-token mean, for diagnostics only.
    pub fn mean_logprob(&self) -> f64 {
        self.total_logprob / self.token_count.max(1) as f64
    }
}

/// The natural-language theory given to the statistician. Empty text is the
/// no-hypothesis baseline.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub text: String,
    /// (iteration, metropolis step) at which the text was proposed.
    #[serde(default)]
    pub created_at: Option<(u32, u32)>,
}

impl HypothesisSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(text: impl Into<String>) -> Self {
        HypothesisSet {
            text: text.into(),
            created_at: None,
        }
    }

    pub fn with_origin(text: impl Into<String>, iteration: u32, step: u32) -> Self {
        HypothesisSet {
            text: text.into(),
            created_at: Some((iteration, step)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 200,
            temperature: 1.0,
            seed: 0,
        }
    }
}

pub trait ScorerBackend: Send + Sync {
    /// Log-probability of `bundle.target` following the prompt.
    fn score(&self, bundle: &PromptBundle) -> Result<ScoredContinuation, ScoringError>;

    /// Free-form continuation of the prompt.
    fn generate(
        &self,
        bundle: &PromptBundle,
        params: &GenerationParams,
    ) -> Result<String, ScoringError>;

    fn name(&self) -> &str;
}

/// Validated scoring call.
pub fn score(
    backend: &dyn ScorerBackend,
    bundle: &PromptBundle,
) -> Result<ScoredContinuation, ScoringError> {
    if bundle.target.is_empty() {
        return Err(ScoringError::InvalidRequest(
            "scoring needs a non-empty target".into(),
        ));
    }
    let scored = backend.score(bundle)?;
    if !(scored.total_logprob <= 0.0) || scored.token_count == 0 {
        return Err(ScoringError::Decode(format!(
            "implausible score {:?} from {}",
            scored,
            backend.name()
        )));
    }
    Ok(scored)
}

/// Validated generation call; the result is cut to `max_tokens` whitespace tokens.
pub fn generate(
    backend: &dyn ScorerBackend,
    bundle: &PromptBundle,
    params: &GenerationParams,
) -> Result<String, ScoringError> {
    if !bundle.target.is_empty() {
        return Err(ScoringError::InvalidRequest(
            "generation requests carry no target".into(),
        ));
    }
    let text = backend.generate(bundle, params)?;
    Ok(truncate_tokens(&text, params.max_tokens))
}

pub(crate) fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let mut seen = 0;
    for (i, ch) in text.char_indices() {
        let starts_token = !ch.is_whitespace()
            && (i == 0 || text[..i].chars().next_back().is_some_and(char::is_whitespace));
        if starts_token {
            if seen == max_tokens {
                return text[..i].trim_end().to_string();
            }
            seen += 1;
        }
    }
    text.to_string()
}
