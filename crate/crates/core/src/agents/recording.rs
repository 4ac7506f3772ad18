//! Backend wrapper that logs every call, for asserting on the executed sequence.

use std::sync::{Arc, Mutex};

use super::{AgentBackend, AgentError, AgentRequest, OrchestratorTask, Role, RoleResponse};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub request_id: String,
    pub role: Role,
    pub task: Option<OrchestratorTask>,
    pub ok: bool,
}

/// Shared, append-only call log.
#[derive(Debug, Clone, Default)]
pub struct InvocationLog(Arc<Mutex<Vec<Invocation>>>);

impl InvocationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> Vec<Invocation> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.entries().into_iter().map(|i| i.role).collect()
    }

    pub fn len(&self) -> usize {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, role: Role) -> usize {
        self.entries().iter().filter(|i| i.role == role).count()
    }

    fn push(&self, invocation: Invocation) {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).push(invocation);
    }
}

pub struct RecordingBackend<B> {
    inner: B,
    log: InvocationLog,
}

impl<B: AgentBackend> RecordingBackend<B> {
    pub fn new(inner: B, log: InvocationLog) -> Self {
        Self { inner, log }
    }

    pub fn log(&self) -> &InvocationLog {
        &self.log
    }
}

impl<B: AgentBackend> AgentBackend for RecordingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        let result = self.inner.call(request);
        self.log.push(Invocation {
            request_id: request.request_id.clone(),
            role: request.role,
            task: request.task(),
            ok: result.is_ok(),
        });
        result
    }
}
