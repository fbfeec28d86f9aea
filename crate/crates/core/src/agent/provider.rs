//! Language-model providers: a scripted stub and an optional remote adapter.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::response::ProviderRequest;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// Safe for concurrent use; the engine calls it serially within a run.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ProviderRequest) -> Result<String, ProviderError>;
}

/// One scripted reply. A string is returned verbatim; an object is
/// returned as its JSON text; `{"transport_error": "..."}` simulates a
/// failed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Raw(String),
    Structured(Value),
}

/// Script file: either a list of entries, or an object with `responses`
/// and an optional `fallback` reused once the list is consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Script {
    pub responses: Vec<ScriptEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<ScriptEntry>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ProviderError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ProviderError::Config(format!("script: {e}")))?;
        match value {
            Value::Array(_) => {
                let responses = serde_json::from_value(value).map_err(|e| ProviderError::Config(e.to_string()))?;
                Ok(Script { responses, fallback: None })
            }
            Value::Object(_) => serde_json::from_value(value).map_err(|e| ProviderError::Config(e.to_string())),
            _ => Err(ProviderError::Config("script must be a list or an object".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Replies from a script keyed by call index.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: Script,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        ScriptedProvider { script, calls: AtomicUsize::new(0) }
    }

    pub fn from_entries(entries: Vec<ScriptEntry>) -> Self {
        Self::new(Script { responses: entries, fallback: None })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _request: &ProviderRequest) -> Result<String, ProviderError> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        let entry = self
            .script
            .responses
            .get(i)
            .or(self.script.fallback.as_ref())
            .ok_or_else(|| ProviderError::Transport(format!("script exhausted at call {i}")))?;
        match entry {
            ScriptEntry::Raw(s) => Ok(s.clone()),
            ScriptEntry::Structured(v) => match v.get("transport_error") {
                Some(msg) => Err(ProviderError::Transport(msg.as_str().unwrap_or("scripted failure").to_string())),
                None => Ok(v.to_string()),
            },
        }
    }
}

pub const ENDPOINT_VAR: &str = "SEARCHSIM_PROVIDER_URL";
pub const TOKEN_VAR: &str = "SEARCHSIM_PROVIDER_TOKEN";

/// POSTs the request as JSON and returns the response body.
#[cfg(feature = "remote")]
pub struct RemoteProvider {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

#[cfg(feature = "remote")]
impl RemoteProvider {
    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| ProviderError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        Ok(RemoteProvider { endpoint, token: std::env::var(TOKEN_VAR).ok(), agent: ureq::Agent::new_with_defaults() })
    }
}

#[cfg(feature = "remote")]
impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &ProviderRequest) -> Result<String, ProviderError> {
        let mut call = self.agent.post(&self.endpoint).header("content-type", "application/json");
        if let Some(token) = &self.token {
            call = call.header("authorization", &format!("Bearer {token}"));
        }
        let body = serde_json::to_string(request).expect("requests serialize");
        let mut response = call.send(body.as_str()).map_err(|e| ProviderError::Transport(e.to_string()))?;
        response.body_mut().read_to_string().map_err(|e| ProviderError::Transport(e.to_string()))
    }
}
