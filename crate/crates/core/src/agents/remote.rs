//! HTTP backend speaking the wire protocol, plus a dry-run wrapper that
//! prints the requests it would send.

use std::io::Write;
use std::sync::Mutex;
use std::time::Duration;

use super::wire::{decode_response, encode_request};
use super::{AgentBackend, AgentError, AgentRequest, RoleResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after a transient failure.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 1,
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &str) -> Result<String, AgentError> {
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AgentError::Timeout(self.config.timeout),
                other => AgentError::BackendUnavailable(other.to_string()),
            })?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AgentError::BackendUnavailable(format!("reading body: {e}")))?;
        if !status.is_success() {
            return Err(AgentError::BackendUnavailable(format!("HTTP {status}: {text}")));
        }
        Ok(text)
    }
}

impl AgentBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        let body = encode_request(request);
        let mut attempts_left = self.config.retries;
        loop {
            match self.attempt(&body) {
                Ok(raw) => return decode_response(request, &raw),
                Err(e) if e.is_transient() && attempts_left > 0 => attempts_left -= 1,
                Err(e) => return Err(e),
            }
        }
    }
}

/// Writes each request's wire form as one line, then answers from `inner`.
pub struct DryRunBackend<B> {
    inner: B,
    sink: Mutex<Box<dyn Write + Send>>,
}

impl<B: AgentBackend> DryRunBackend<B> {
    pub fn new(inner: B, sink: Box<dyn Write + Send>) -> Self {
        Self {
            inner,
            sink: Mutex::new(sink),
        }
    }
}

impl<B: AgentBackend> AgentBackend for DryRunBackend<B> {
    fn name(&self) -> &str {
        "dry-run"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        {
            let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
            writeln!(sink, "{}", encode_request(request))
                .map_err(|e| AgentError::BackendUnavailable(format!("dry-run sink: {e}")))?;
        }
        self.inner.call(request)
    }
}
