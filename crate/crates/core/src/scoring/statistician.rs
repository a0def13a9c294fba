use std::collections::HashMap;

use parking_lot::Mutex;

use crate::env::TransitionRecord;
use crate::par::{self, Exec};

use super::{build_statistician_prompt, score, HypothesisSet, PromptTemplates, ScorerBackend, ScoringError};

type CacheKey = (String, String, String, String);

/// The forward model: scores change sentences under a hypothesis set.
///
/// Scores are memoised per (hypotheses, state, action, change) text until
/// [`Statistician::clear_cache`] is called.
pub struct Statistician<'a> {
    backend: &'a dyn ScorerBackend,
    templates: PromptTemplates,
    exec: Exec,
    cache: Mutex<HashMap<CacheKey, f64>>,
}

impl<'a> Statistician<'a> {
    pub fn new(backend: &'a dyn ScorerBackend) -> Self {
        Statistician {
            backend,
            templates: PromptTemplates::v1(),
            exec: Exec::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn backend(&self) -> &dyn ScorerBackend {
        self.backend
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    pub fn clear_cache(&self) {
        self.cache.lock().clear();
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().len()
    }

    /// log P(change | state, action, hypotheses).
    pub fn score_change(
        &self,
        hypotheses: &HypothesisSet,
        state_text: &str,
        action_text: &str,
        change_text: &str,
    ) -> Result<f64, ScoringError> {
        let key = (
            hypotheses.text.clone(),
            state_text.to_string(),
            action_text.to_string(),
            change_text.to_string(),
        );
        if let Some(&hit) = self.cache.lock().get(&key) {
            return Ok(hit);
        }
        let bundle = build_statistician_prompt(
            &self.templates,
            hypotheses,
            state_text,
            action_text,
            change_text,
        );
        let value = score(self.backend, &bundle)?.total_logprob;
        self.cache.lock().insert(key, value);
        Ok(value)
    }

    pub fn score_record(
        &self,
        hypotheses: &HypothesisSet,
        record: &TransitionRecord,
    ) -> Result<f64, ScoringError> {
        self.score_change(
            hypotheses,
            &record.state_text,
            &record.action_text,
            &record.change_text,
        )
    }

    /// Per-record scores, in record order. Fans out according to the exec mode.
    pub fn score_records(
        &self,
        hypotheses: &HypothesisSet,
        records: &[TransitionRecord],
    ) -> Result<Vec<f64>, ScoringError> {
        par::try_map(self.exec, records, |r| self.score_record(hypotheses, r))
    }
}
