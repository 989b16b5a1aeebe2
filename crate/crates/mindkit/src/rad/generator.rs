//! Pluggable completion backends for batch rationale generation.
//!
//! The backend is selected by the endpoint scheme: `mock://…` serves the
//! deterministic rule-based generator, anything `http(s)://…` goes through
//! the wire client with retries and exponential backoff.

use crate::error::{MindError, Result};
use crate::rad::mock::MockGenerator;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Mutex;
use std::time::Duration;

/// Field names of the completion wire contract, configurable per backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireProfile {
    pub model_field: String,
    pub prompt_field: String,
    pub temperature_field: String,
    pub max_tokens_field: String,
    /// Dot-separated path to the completion text in the response body,
    /// e.g. "completion" or "choices.0.text".
    pub completion_path: String,
}

impl Default for WireProfile {
    fn default() -> Self {
        WireProfile {
            model_field: "model".into(),
            prompt_field: "prompt".into(),
            temperature_field: "temperature".into(),
            max_tokens_field: "max_tokens".into(),
            completion_path: "completion".into(),
        }
    }
}

/// Connection and retry settings for one generator backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub endpoint: String,
    pub model_id: String,
    pub max_attempts: u32,
    pub request_timeout_ms: u64,
    pub max_parallel: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Base delay for exponential backoff between retries.
    pub backoff_ms: u64,
    #[serde(default)]
    pub profile: WireProfile,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            endpoint: "mock://rad".into(),
            model_id: "mock".into(),
            max_attempts: 3,
            request_timeout_ms: 30_000,
            max_parallel: 4,
            temperature: 0.7,
            max_tokens: 1024,
            backoff_ms: 100,
            profile: WireProfile::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(MindError::Config("max_attempts must be >= 1".into()));
        }
        if self.max_parallel < 1 {
            return Err(MindError::Config("max_parallel must be >= 1".into()));
        }
        if self.temperature < 0.0 {
            return Err(MindError::Config("temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint.starts_with("mock://")
    }
}

/// A completion backend. Implementations must be safe to call from several
/// worker threads at once.
pub trait Generator: Send + Sync {
    /// One completion attempt; transport-level retries live in [`generate`].
    fn complete(&self, prompt: &str) -> Result<String>;

    /// Short identifier recorded in rationale provenance.
    fn id(&self) -> String;
}

/// Run one generation call with retries and exponential backoff on
/// transport failures. Backend (non-success status) errors also retry:
/// at this layer they are indistinguishable from transient overload.
pub fn generate(generator: &dyn Generator, prompt: &str, cfg: &GeneratorConfig) -> Result<String> {
    let mut last_error = None;
    for attempt in 0..cfg.max_attempts {
        if attempt > 0 {
            let delay = cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
            std::thread::sleep(Duration::from_millis(delay));
        }
        match generator.complete(prompt) {
            Ok(text) => return Ok(text),
            Err(e @ (MindError::Transport { .. } | MindError::Backend { .. })) => {
                log::warn!("generation attempt {} failed: {}", attempt + 1, e);
                last_error = Some(e);
            }
            Err(other) => return Err(other),
        }
    }
    let message = match last_error {
        Some(e) => e.to_string(),
        None => "no attempts made".to_string(),
    };
    Err(MindError::Transport {
        attempts: cfg.max_attempts,
        message,
    })
}

/// Build the backend selected by the endpoint scheme.
pub fn backend_for(cfg: &GeneratorConfig) -> Result<Box<dyn Generator>> {
    if cfg.is_mock() {
        Ok(Box::new(MockGenerator::new()))
    } else if cfg.endpoint.starts_with("http://") || cfg.endpoint.starts_with("https://") {
        Ok(Box::new(HttpGenerator::new(cfg)?))
    } else {
        Err(MindError::Config(format!(
            "unsupported generator endpoint scheme: {}",
            cfg.endpoint
        )))
    }
}

/// Blocking HTTP client for text-completion backends.
pub struct HttpGenerator {
    client: reqwest::blocking::Client,
    endpoint: String,
    model_id: String,
    temperature: f64,
    max_tokens: u32,
    profile: WireProfile,
}

impl HttpGenerator {
    pub fn new(cfg: &GeneratorConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.request_timeout_ms))
            .build()
            .map_err(|e| MindError::Config(format!("http client: {}", e)))?;
        Ok(HttpGenerator {
            client,
            endpoint: cfg.endpoint.clone(),
            model_id: cfg.model_id.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            profile: cfg.profile.clone(),
        })
    }
}

impl Generator for HttpGenerator {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            self.profile.model_field.as_str(): self.model_id,
            self.profile.prompt_field.as_str(): prompt,
            self.profile.temperature_field.as_str(): self.temperature,
            self.profile.max_tokens_field.as_str(): self.max_tokens,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .map_err(|e| MindError::Transport {
                attempts: 1,
                message: e.to_string(),
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| MindError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(MindError::Backend {
                status: status.as_u16(),
                body_excerpt: text.chars().take(200).collect(),
            });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| MindError::BadResponse(e.to_string()))?;
        extract_path(&value, &self.profile.completion_path)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                MindError::BadResponse(format!(
                    "no string at {:?} in response",
                    self.profile.completion_path
                ))
            })
    }

    fn id(&self) -> String {
        format!("http:{}", self.model_id)
    }
}

fn extract_path<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    let mut current = value;
    for part in path.split('.') {
        current = match part.parse::<usize>() {
            Ok(index) => current.get(index)?,
            Err(_) => current.get(part)?,
        };
    }
    Some(current)
}

/// Test backend that replays a fixed transcript of outcomes.
pub struct ScriptedGenerator {
    script: Mutex<std::vec::IntoIter<Result<String>>>,
    pub calls: Mutex<Vec<String>>,
}

impl ScriptedGenerator {
    pub fn new(script: Vec<Result<String>>) -> Self {
        ScriptedGenerator {
            script: Mutex::new(script.into_iter()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl Generator for ScriptedGenerator {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.calls.lock().unwrap().push(prompt.to_string());
        match self.script.lock().unwrap().next() {
            Some(outcome) => outcome,
            None => Err(MindError::Transport {
                attempts: 1,
                message: "script exhausted".to_string(),
            }),
        }
    }

    fn id(&self) -> String {
        "scripted".to_string()
    }
}
