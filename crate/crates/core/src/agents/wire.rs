//! JSON wire format shared by the remote backend and scripted fixtures.
//!
//! Request: `{request_id, role, instruction, context}`.
//! Response: `{request_id, role, payload}` where `payload` is the role's
//! response object. A Grounder may instead send its bare report string
//! (`"[stroke 3, stroke 7]"`) when the context holds exactly one rally.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::context::rally_refs;
use super::report::{is_strict_report, parse_grounder_text_ordered};
use super::{AgentError, AgentRequest, CriticResponse, GrounderResponse, OrchestratorResponse, Role, RoleResponse};
use crate::domain::StrokeRef;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireResponse {
    pub request_id: String,
    pub role: Role,
    pub payload: Value,
}

pub fn encode_request(request: &AgentRequest) -> String {
    serde_json::to_string(request).expect("request serializes")
}

/// Wire form of a response, as a server would send it.
pub fn encode_response(request_id: &str, response: &RoleResponse) -> String {
    let payload = match response {
        RoleResponse::Orchestrator(o) => serde_json::to_value(o),
        RoleResponse::Grounder(g) => serde_json::to_value(g),
        RoleResponse::Critic(c) => serde_json::to_value(c),
    }
    .expect("response serializes");
    serde_json::to_string(&WireResponse {
        request_id: request_id.to_string(),
        role: response.role(),
        payload,
    })
    .expect("response serializes")
}

fn typed<T: serde::de::DeserializeOwned>(payload: &Value) -> Result<T, AgentError> {
    serde_json::from_value(payload.clone()).map_err(|e| AgentError::schema(payload.to_string(), e.to_string()))
}

/// Decodes a role payload. `context` resolves bare Grounder reports.
pub fn decode_payload(role: Role, payload: &Value, context: &str) -> Result<RoleResponse, AgentError> {
    match role {
        Role::Orchestrator => typed::<OrchestratorResponse>(payload).map(RoleResponse::Orchestrator),
        Role::Critic => typed::<CriticResponse>(payload).map(RoleResponse::Critic),
        Role::Grounder => match payload {
            Value::String(text) => {
                if !is_strict_report(text) {
                    return Err(AgentError::schema(text, "grounder output must be a bare report"));
                }
                let rallies = rally_refs(context);
                let [rally] = rallies.as_slice() else {
                    return Err(AgentError::schema(
                        text,
                        "bare report needs a context with exactly one rally",
                    ));
                };
                let stroke_refs = parse_grounder_text_ordered(text)?
                    .into_iter()
                    .map(|i| StrokeRef::new(rally.rally_id.clone(), i))
                    .collect();
                Ok(RoleResponse::Grounder(GrounderResponse { stroke_refs }))
            }
            other => typed::<GrounderResponse>(other).map(RoleResponse::Grounder),
        },
    }
}

/// Decodes a raw response body for `request`.
pub fn decode_response(request: &AgentRequest, raw: &str) -> Result<RoleResponse, AgentError> {
    let wire: WireResponse =
        serde_json::from_str(raw).map_err(|e| AgentError::schema(raw, format!("not a wire response: {e}")))?;
    if wire.request_id != request.request_id {
        return Err(AgentError::schema(
            raw,
            format!("request_id {} does not match {}", wire.request_id, request.request_id),
        ));
    }
    if wire.role != request.role {
        return Err(AgentError::schema(
            raw,
            format!("role {} does not match {}", wire.role, request.role),
        ));
    }
    decode_payload(wire.role, &wire.payload, &request.context)
}
