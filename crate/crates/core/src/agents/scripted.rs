//! Fixture-driven backend for reproducing specific agent behaviour.
//!
//! ```json
//! {
//!   "fallback": "oracle",
//!   "rules": [
//!     {"role": "orchestrator", "instruction_contains": "stroke 3",
//!      "payloads": [{"branch": "video_reasoning", "answer": "Stroke 3 is a clear.",
//!                    "sub_queries": null, "reasoning_trace": "guess"}]},
//!     {"role": "grounder", "instruction_contains": "lobs",
//!      "payloads": [{"error": "timeout"}]}
//!   ]
//! }
//! ```
//!
//! The first rule whose role and substrings match answers the request. Its
//! payloads are used in order, the last one repeating once exhausted.
//! Unmatched requests go to the fallback.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::wire::decode_payload;
use super::{AgentBackend, AgentError, AgentRequest, Role, RoleResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    Oracle,
    #[default]
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    pub role: Role,
    #[serde(default)]
    pub instruction_contains: String,
    #[serde(default)]
    pub context_contains: Option<String>,
    pub payloads: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFixture {
    #[serde(default)]
    pub fallback: Fallback,
    pub rules: Vec<ScriptRule>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rule {0} has no payloads")]
    EmptyRule(usize),
}

impl ScriptFixture {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let fixture: ScriptFixture = serde_json::from_str(text)?;
        if let Some(i) = fixture.rules.iter().position(|r| r.payloads.is_empty()) {
            return Err(FixtureError::EmptyRule(i));
        }
        Ok(fixture)
    }
}

pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    cursors: Mutex<Vec<usize>>,
    fallback: Option<Arc<dyn AgentBackend>>,
}

impl ScriptedBackend {
    /// `fallback` answers unmatched requests; without one they fail as unavailable.
    pub fn new(fixture: ScriptFixture, fallback: Option<Arc<dyn AgentBackend>>) -> Self {
        let n = fixture.rules.len();
        Self {
            rules: fixture.rules,
            cursors: Mutex::new(vec![0; n]),
            fallback,
        }
    }

    fn next_payload(&self, rule: usize) -> Value {
        let mut cursors = self.cursors.lock().unwrap_or_else(|p| p.into_inner());
        let payloads = &self.rules[rule].payloads;
        let i = cursors[rule].min(payloads.len() - 1);
        cursors[rule] += 1;
        payloads[i].clone()
    }
}

fn scripted_error(payload: &Value) -> Option<AgentError> {
    let obj = payload.as_object().filter(|o| o.len() == 1)?;
    let kind = obj.get("error")?.as_str()?;
    Some(match kind {
        "timeout" => AgentError::Timeout(Duration::from_secs(30)),
        other => AgentError::BackendUnavailable(format!("scripted failure: {other}")),
    })
}

impl AgentBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        let hit = self.rules.iter().position(|r| {
            r.role == request.role
                && request.instruction.contains(&r.instruction_contains)
                && r.context_contains
                    .as_ref()
                    .is_none_or(|c| request.context.contains(c.as_str()))
        });
        match (hit, &self.fallback) {
            (Some(rule), _) => {
                let payload = self.next_payload(rule);
                if let Some(err) = scripted_error(&payload) {
                    return Err(err);
                }
                decode_payload(request.role, &payload, &request.context)
            }
            (None, Some(fallback)) => fallback.call(request),
            (None, None) => Err(AgentError::BackendUnavailable(format!(
                "no scripted rule for {} request {}",
                request.role, request.request_id
            ))),
        }
    }
}
