//! Client for OpenAI-compatible `/completions` endpoints.
//!
//! Scoring sends the chat-templated prompt followed by the target and asks the
//! server to echo prompt log-probabilities; the tokens whose text offsets fall
//! inside the target are summed. Field names are configurable so the same
//! client can talk to servers that differ in their response layout.

use std::thread;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GenerationParams, PromptBundle, ScoredContinuation, ScorerBackend, ScoringError};

/// Dotted paths into the JSON response (`choices.0.text`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseFields {
    pub token_logprobs: String,
    pub text_offset: String,
    pub text: String,
}

impl Default for ResponseFields {
    fn default() -> Self {
        ResponseFields {
            token_logprobs: "choices.0.logprobs.token_logprobs".into(),
            text_offset: "choices.0.logprobs.text_offset".into(),
            text: "choices.0.text".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub url: String,
    pub model: String,
    /// Environment variable holding the API key; no auth header when unset.
    pub api_key_env: Option<String>,
    /// Chat template with `{system}`, `{user}` and a trailing `{assistant}`.
    pub chat_template: String,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub attempts: usize,
    pub backoff_ms: u64,
    /// `max_tokens` sent with scoring requests (some servers reject 0).
    pub score_max_tokens: usize,
    /// Text offsets count bytes rather than characters.
    pub byte_offsets: bool,
    pub fields: ResponseFields,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url: "http://localhost:8000/v1".into(),
            model: "microsoft/Phi-3-mini-4k-instruct".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            chat_template:
                "<|system|>\n{system}<|end|>\n<|user|>\n{user}<|end|>\n<|assistant|>\n{assistant}"
                    .into(),
            max_in_flight: 8,
            timeout_secs: 120,
            attempts: 3,
            backoff_ms: 500,
            score_max_tokens: 1,
            byte_offsets: false,
            fields: ResponseFields::default(),
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock();
        while *free == 0 {
            self.cv.wait(&mut free);
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock() += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    in_flight: Semaphore,
}

fn lookup<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    path.split('.').try_fold(value, |v, key| match key.parse::<usize>() {
        Ok(i) => v.get(i),
        Err(_) => v.get(key),
    })
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, ScoringError> {
        if !config.chat_template.ends_with("{assistant}") {
            return Err(ScoringError::InvalidRequest(
                "chat template must end with {assistant}".into(),
            ));
        }
        let api_key = match &config.api_key_env {
            Some(var) => match std::env::var(var) {
                Ok(key) => Some(key),
                Err(_) => {
                    log::warn!("{var} is not set; sending requests without an API key");
                    None
                }
            },
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            in_flight: Semaphore::new(config.max_in_flight),
            config,
            agent,
            api_key,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// Prompt text up to the start of the assistant turn.
    pub fn prefix(&self, bundle: &PromptBundle) -> String {
        let t = &self.config.chat_template;
        let head = &t[..t.len() - "{assistant}".len()];
        head.replacen("{system}", &bundle.system, 1)
            .replacen("{user}", &bundle.user, 1)
    }

    fn post_once(&self, body: &Value) -> Result<Value, ScoringError> {
        let _permit = self.in_flight.acquire();
        let url = format!("{}/completions", self.config.url.trim_end_matches('/'));
        let mut request = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| ScoringError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ScoringError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ScoringError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| ScoringError::Decode(e.to_string()))
    }

    /// Runs `parse` on the response of `body`, retrying the whole exchange with
    /// exponential backoff. Nothing outside this call is touched on failure.
    fn with_retries<T>(
        &self,
        body: &Value,
        parse: impl Fn(&Value) -> Result<T, ScoringError>,
    ) -> Result<T, ScoringError> {
        let attempts = self.config.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.post_once(body).and_then(|v| parse(&v)) {
                Ok(out) => return Ok(out),
                Err(e) => {
                    log::warn!("request attempt {} of {attempts} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(ScoringError::Exhausted { attempts, last })
    }

    fn sum_target_logprobs(
        &self,
        response: &Value,
        start: usize,
        end: usize,
    ) -> Result<ScoredContinuation, ScoringError> {
        let fields = &self.config.fields;
        let logprobs = lookup(response, &fields.token_logprobs)
            .and_then(Value::as_array)
            .ok_or_else(|| ScoringError::MissingLogprobs(fields.token_logprobs.clone()))?;
        let offsets = lookup(response, &fields.text_offset)
            .and_then(Value::as_array)
            .ok_or_else(|| ScoringError::MissingLogprobs(fields.text_offset.clone()))?;
        let mut total = 0.0;
        let mut count = 0;
        for (lp, off) in logprobs.iter().zip(offsets) {
            let off = off
                .as_u64()
                .ok_or_else(|| ScoringError::Decode("non-integer text offset".into()))?
                as usize;
            if off < start || off >= end {
                continue;
            }
            let lp = lp.as_f64().ok_or_else(|| {
                ScoringError::MissingLogprobs(format!("null log-probability at offset {off}"))
            })?;
            total += lp;
            count += 1;
        }
        if count == 0 {
            return Err(ScoringError::MissingLogprobs(
                "no tokens inside the target span".into(),
            ));
        }
        Ok(ScoredContinuation {
            total_logprob: total,
            token_count: count,
        })
    }
}

impl ScorerBackend for HttpBackend {
    fn score(&self, bundle: &PromptBundle) -> Result<ScoredContinuation, ScoringError> {
        let prefix = self.prefix(bundle);
        let full = format!("{prefix}{}", bundle.target);
        let len = |s: &str| {
            if self.config.byte_offsets {
                s.len()
            } else {
                s.chars().count()
            }
        };
        let (start, end) = (len(&prefix), len(&full));
        let body = json!({
            "model": self.config.model,
            "prompt": full,
            "max_tokens": self.config.score_max_tokens,
            "temperature": 0.0,
            "echo": true,
            "logprobs": 1,
        });
        self.with_retries(&body, |v| self.sum_target_logprobs(v, start, end))
    }

    fn generate(
        &self,
        bundle: &PromptBundle,
        params: &GenerationParams,
    ) -> Result<String, ScoringError> {
        let body = json!({
            "model": self.config.model,
            "prompt": self.prefix(bundle),
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
        });
        let path = &self.config.fields.text;
        self.with_retries(&body, |v| {
            lookup(v, path)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| ScoringError::Decode(format!("no text at {path}")))
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}
