//! Orchestrator, Grounder and Critic role contracts.
//!
//! All three roles run on one backend handle; they differ only by the
//! instruction prefix on the request and by the response schema enforced on
//! the way back. [`invoke`] is the single entry point and guarantees the
//! returned variant matches the requested role.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{StrokeRef, Verdict};

pub mod claims;
pub mod context;
pub mod oracle;
pub mod recording;
pub mod remote;
pub mod report;
pub mod scripted;
pub mod wire;

pub use claims::{extract_claims, Claim, Predicate};
pub use oracle::{oracle_critic, oracle_ground, EventSpec, OracleBackend, ScriptGroup};
pub use recording::{Invocation, InvocationLog, RecordingBackend};
pub use remote::{DryRunBackend, RemoteBackend, RemoteConfig};
pub use report::{parse_grounder_text, parse_grounder_text_ordered, render_report};
pub use scripted::{Fallback, FixtureError, ScriptFixture, ScriptedBackend};

pub const ORCHESTRATOR_PREFIX: &str =
    "You are an Orchestrator Agent responsible for intent routing and task-adaptive control.";
pub const GROUNDER_PREFIX: &str = "You are a Grounder Agent responsible for temporal localization.";
pub const CRITIC_PREFIX: &str = "You are a Critic Agent responsible for fact-checking and consistency.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("schema violation: {reason} (raw: {raw})")]
    SchemaViolation { raw: String, reason: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("no bracketed report in: {0}")]
    UnparseableReport(String),
}

impl AgentError {
    pub(crate) fn schema(raw: impl Into<String>, reason: impl Into<String>) -> Self {
        AgentError::SchemaViolation {
            raw: raw.into(),
            reason: reason.into(),
        }
    }

    /// Transport-level failures worth a retry.
    pub fn is_transient(&self) -> bool {
        matches!(self, AgentError::BackendUnavailable(_) | AgentError::Timeout(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Orchestrator,
    Grounder,
    Critic,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Orchestrator => ORCHESTRATOR_PREFIX,
            Role::Grounder => GROUNDER_PREFIX,
            Role::Critic => CRITIC_PREFIX,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Orchestrator => "orchestrator",
            Role::Grounder => "grounder",
            Role::Critic => "critic",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the Orchestrator is being asked to do; carried as a `Task:` line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrchestratorTask {
    ClassifyIntent,
    TextQa,
    RallyQa,
    SummaryPlan,
    SummaryScript,
}

impl OrchestratorTask {
    const ALL: [OrchestratorTask; 5] = [
        OrchestratorTask::ClassifyIntent,
        OrchestratorTask::TextQa,
        OrchestratorTask::RallyQa,
        OrchestratorTask::SummaryPlan,
        OrchestratorTask::SummaryScript,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrchestratorTask::ClassifyIntent => "classify_intent",
            OrchestratorTask::TextQa => "text_qa",
            OrchestratorTask::RallyQa => "rally_qa",
            OrchestratorTask::SummaryPlan => "summary_plan",
            OrchestratorTask::SummaryScript => "summary_script",
        }
    }

    /// Branch a well-behaved Orchestrator answers with. `None` for intent
    /// classification, where the branch itself is the answer.
    pub fn expected_branch(self) -> Option<OrchestratorBranch> {
        match self {
            OrchestratorTask::ClassifyIntent => None,
            OrchestratorTask::TextQa => Some(OrchestratorBranch::TextAnswer),
            OrchestratorTask::RallyQa | OrchestratorTask::SummaryScript => {
                Some(OrchestratorBranch::VideoReasoning)
            }
            OrchestratorTask::SummaryPlan => Some(OrchestratorBranch::SummarizationPlan),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub request_id: String,
    pub role: Role,
    pub instruction: String,
    pub context: String,
}

impl AgentRequest {
    pub fn orchestrator(
        request_id: impl Into<String>,
        task: OrchestratorTask,
        query: &str,
        context: impl Into<String>,
    ) -> Self {
        Self {
            request_id: request_id.into(),
            role: Role::Orchestrator,
            instruction: format!("{ORCHESTRATOR_PREFIX}\nTask: {}\nQuery: {query}", task.as_str()),
            context: context.into(),
        }
    }

    pub fn grounder(request_id: impl Into<String>, sub_query: &str, context: impl Into<String>) -> Self {
        Self {
            request_id: request_id.into(),
            role: Role::Grounder,
            instruction: format!("{GROUNDER_PREFIX}\nQuery: {sub_query}"),
            context: context.into(),
        }
    }

    pub fn critic(request_id: impl Into<String>, claim: &Claim, context: impl Into<String>) -> Self {
        Self {
            request_id: request_id.into(),
            role: Role::Critic,
            instruction: format!("{CRITIC_PREFIX}\nClaim: {claim}"),
            context: context.into(),
        }
    }

    /// Value of a `Name: value` line in the instruction.
    pub fn field(&self, name: &str) -> Option<&str> {
        self.instruction.lines().find_map(|line| {
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(str::trim)
        })
    }

    pub fn task(&self) -> Option<OrchestratorTask> {
        let t = self.field("Task")?;
        OrchestratorTask::ALL.into_iter().find(|k| k.as_str() == t)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !self.instruction.starts_with(self.role.prefix()) {
            return Err(AgentError::schema(
                &self.instruction,
                format!("instruction must start with the {} prefix", self.role),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrchestratorBranch {
    TextAnswer,
    VideoReasoning,
    SummarizationPlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorResponse {
    pub branch: OrchestratorBranch,
    pub answer: Option<String>,
    pub sub_queries: Option<Vec<String>>,
    pub reasoning_trace: String,
}

impl OrchestratorResponse {
    pub fn answer(branch: OrchestratorBranch, answer: impl Into<String>, trace: impl Into<String>) -> Self {
        Self {
            branch,
            answer: Some(answer.into()),
            sub_queries: None,
            reasoning_trace: trace.into(),
        }
    }

    pub fn plan(sub_queries: Vec<String>, trace: impl Into<String>) -> Self {
        Self {
            branch: OrchestratorBranch::SummarizationPlan,
            answer: None,
            sub_queries: Some(sub_queries),
            reasoning_trace: trace.into(),
        }
    }
}

/// Grounder output: locations only, never reasoning text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrounderResponse {
    pub stroke_refs: Vec<StrokeRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticResponse {
    pub assertion: String,
    pub evidence_cited: Vec<StrokeRef>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum RoleResponse {
    Orchestrator(OrchestratorResponse),
    Grounder(GrounderResponse),
    Critic(CriticResponse),
}

impl RoleResponse {
    pub fn role(&self) -> Role {
        match self {
            RoleResponse::Orchestrator(_) => Role::Orchestrator,
            RoleResponse::Grounder(_) => Role::Grounder,
            RoleResponse::Critic(_) => Role::Critic,
        }
    }

    /// Checks the per-role structural rules.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            RoleResponse::Orchestrator(o) => {
                let plan = o.branch == OrchestratorBranch::SummarizationPlan;
                if o.answer.is_some() == plan {
                    return Err(format!("answer must be present iff branch is not summarization_plan ({:?})", o.branch));
                }
                if o.sub_queries.is_some() != plan {
                    return Err(format!("sub_queries must be present iff branch is summarization_plan ({:?})", o.branch));
                }
                Ok(())
            }
            RoleResponse::Grounder(g) => {
                if g.stroke_refs.iter().any(|r| r.stroke_index == 0) {
                    return Err("stroke indices are 1-based".into());
                }
                Ok(())
            }
            RoleResponse::Critic(c) => {
                if !c.verdict.is_well_formed() {
                    return Err("refuted/insufficient verdicts need a non-empty evidence note".into());
                }
                Ok(())
            }
        }
    }

    pub fn summary(&self) -> String {
        match self {
            RoleResponse::Orchestrator(o) => match (&o.answer, &o.sub_queries) {
                (Some(a), _) => format!("{:?}: {a}", o.branch),
                (None, Some(q)) => format!("{:?}: {}", o.branch, q.join(" | ")),
                (None, None) => format!("{:?}", o.branch),
            },
            RoleResponse::Grounder(g) => {
                let refs: Vec<String> = g.stroke_refs.iter().map(ToString::to_string).collect();
                format!("[{}]", refs.join(", "))
            }
            RoleResponse::Critic(c) => match c.verdict.note() {
                Some(note) => format!("{}: {} ({note})", c.verdict.label(), c.assertion),
                None => format!("{}: {}", c.verdict.label(), c.assertion),
            },
        }
    }
}

/// Anything that can answer role requests. Implementations must be callable
/// from several workers at once and keep no state across requests that
/// changes their answers, except where a test double does so on purpose.
pub trait AgentBackend: Send + Sync {
    fn name(&self) -> &str;

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        (**self).call(request)
    }
}

/// Validates the request, calls the backend and rejects any response whose
/// variant or structure does not fit the requested role.
pub fn invoke(backend: &dyn AgentBackend, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
    request.validate()?;
    let response = backend.call(request)?;
    if response.role() != request.role {
        return Err(AgentError::schema(
            response.summary(),
            format!("expected a {} response, got {}", request.role, response.role()),
        ));
    }
    response
        .validate()
        .map_err(|reason| AgentError::schema(response.summary(), reason))?;
    Ok(response)
}

/// Backend handles per role. [`Backends::shared`] puts one handle behind all three.
#[derive(Clone)]
pub struct Backends {
    pub orchestrator: Arc<dyn AgentBackend>,
    pub grounder: Arc<dyn AgentBackend>,
    pub critic: Arc<dyn AgentBackend>,
}

impl Backends {
    pub fn shared(backend: Arc<dyn AgentBackend>) -> Self {
        Self {
            orchestrator: backend.clone(),
            grounder: backend.clone(),
            critic: backend,
        }
    }

    pub fn for_role(&self, role: Role) -> &dyn AgentBackend {
        match role {
            Role::Orchestrator => self.orchestrator.as_ref(),
            Role::Grounder => self.grounder.as_ref(),
            Role::Critic => self.critic.as_ref(),
        }
    }
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("orchestrator", &self.orchestrator.name())
            .field("grounder", &self.grounder.name())
            .field("critic", &self.critic.name())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(RoleResponse);

    impl AgentBackend for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }

        fn call(&self, _request: &AgentRequest) -> Result<RoleResponse, AgentError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn mismatched_variant_is_rejected() {
        let b = Fixed(RoleResponse::Grounder(GrounderResponse::default()));
        let req = AgentRequest::orchestrator("1", OrchestratorTask::TextQa, "q", "");
        assert!(matches!(invoke(&b, &req), Err(AgentError::SchemaViolation { .. })));
    }

    #[test]
    fn plan_without_sub_queries_is_rejected() {
        let bad = OrchestratorResponse {
            branch: OrchestratorBranch::SummarizationPlan,
            answer: Some("x".into()),
            sub_queries: None,
            reasoning_trace: String::new(),
        };
        let b = Fixed(RoleResponse::Orchestrator(bad));
        let req = AgentRequest::orchestrator("1", OrchestratorTask::SummaryPlan, "q", "");
        assert!(matches!(invoke(&b, &req), Err(AgentError::SchemaViolation { .. })));
    }

    #[test]
    fn request_prefix_enforced() {
        let mut req = AgentRequest::grounder("1", "find all smashes", "");
        assert!(req.validate().is_ok());
        assert!(req.instruction.starts_with("You are a Grounder Agent responsible for temporal localization."));
        req.role = Role::Critic;
        assert!(req.validate().is_err());
    }

    #[test]
    fn instruction_fields() {
        let req = AgentRequest::orchestrator("1", OrchestratorTask::RallyQa, "What shot is stroke 3?", "");
        assert_eq!(req.task(), Some(OrchestratorTask::RallyQa));
        assert_eq!(req.field("Query"), Some("What shot is stroke 3?"));
    }
}
