//! Chat backends: the trait, retry policy, and backend configuration.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::http::HttpBackend;
use super::scripted::ScriptedBackend;
use crate::error::{Error, Result};
use crate::io;

/// Who a request is for. Tools are answered by the backend too.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Planner,
    Programmer,
    FoundryRuleAnalysis,
    LayoutDrvAnalysis,
}

impl AgentRole {
    pub fn name(self) -> &'static str {
        match self {
            AgentRole::Planner => "planner",
            AgentRole::Programmer => "programmer",
            AgentRole::FoundryRuleAnalysis => "foundry_rule_analysis",
            AgentRole::LayoutDrvAnalysis => "layout_drv_analysis",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    /// Shown to text-only readers and used in transcript metadata.
    pub name: String,
    pub media_type: String,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub role: MessageRole,
    pub text: String,
    pub images: Vec<Image>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message { role: MessageRole::System, text: text.into(), images: Vec::new() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message { role: MessageRole::User, text: text.into(), images: Vec::new() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Message { role: MessageRole::Assistant, text: text.into(), images: Vec::new() }
    }

    pub fn with_images(mut self, images: Vec<Image>) -> Self {
        self.images = images;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatRequest {
    pub agent: AgentRole,
    /// Zero-based count of earlier requests for the same role in this run.
    pub turn: usize,
    pub messages: Vec<Message>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub vision: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: timeouts, rate limits, server errors.
    Transient(String),
    Fatal(String),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Transient(m) => write!(f, "transient: {m}"),
            BackendError::Fatal(m) => f.write_str(m),
        }
    }
}

/// A chat model. Implementations keep no conversation state; the
/// orchestrator sends the full history with every request.
pub trait ChatBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, BackendError>;
}

pub const ATTEMPTS: u32 = 3;

/// Calls the backend up to [`ATTEMPTS`] times, doubling `backoff` after each
/// transient failure.
pub fn complete_with_retry(backend: &dyn ChatBackend, request: &ChatRequest, backoff: Duration) -> Result<String> {
    let mut delay = backoff;
    let mut last = String::new();
    for attempt in 1..=ATTEMPTS {
        match backend.complete(request) {
            Ok(text) => return Ok(text),
            Err(BackendError::Fatal(m)) => return Err(Error::Backend(format!("{}: {m}", request.agent.name()))),
            Err(BackendError::Transient(m)) => {
                last = m;
                if attempt < ATTEMPTS && !delay.is_zero() {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
    Err(Error::Backend(format!("{}: gave up after {ATTEMPTS} attempts: {last}", request.agent.name())))
}

/// Backend selection file, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Scripted {
        /// Script file, relative to the config file.
        script: String,
        #[serde(default)]
        vision: Option<bool>,
    },
    Http {
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token; unset means no auth header.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        vision: bool,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_backoff")]
        backoff_ms: u64,
        #[serde(default)]
        temperature: Option<f64>,
    },
}

fn default_timeout() -> u64 {
    120
}

fn default_backoff() -> u64 {
    1000
}

pub struct LoadedBackend {
    pub backend: Box<dyn ChatBackend>,
    pub backoff: Duration,
    /// Scripted runs stamp transcript entries with a logical clock.
    pub logical_clock: bool,
}

pub fn load_backend(path: &Path) -> Result<LoadedBackend> {
    let config: BackendConfig = io::read_json(path)?;
    match config {
        BackendConfig::Scripted { script, vision } => {
            let base = path.parent().unwrap_or(Path::new("."));
            let mut b = ScriptedBackend::load(&base.join(script))?;
            if let Some(v) = vision {
                b.vision = v;
            }
            Ok(LoadedBackend { backend: Box::new(b), backoff: Duration::ZERO, logical_clock: true })
        }
        BackendConfig::Http { endpoint, model, api_key_env, vision, timeout_secs, backoff_ms, temperature } => {
            let api_key = match api_key_env {
                Some(var) => Some(std::env::var(&var).map_err(|_| {
                    Error::Usage(format!("{}: environment variable {var} is not set", path.display()))
                })?),
                None => None,
            };
            let b = HttpBackend::new(endpoint, model, api_key, vision, Duration::from_secs(timeout_secs), temperature);
            Ok(LoadedBackend { backend: Box::new(b), backoff: Duration::from_millis(backoff_ms), logical_clock: false })
        }
    }
}
