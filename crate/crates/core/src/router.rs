//! Intent routing and plan selection.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{invoke, AgentBackend, AgentError, AgentRequest, OrchestratorBranch, OrchestratorTask, RoleResponse};
use crate::domain::{Intent, PolicyPlan, PolicyStep};

/// Rules shipped with the crate.
pub const DEFAULT_RULES_JSON: &str = include_str!("../config/default_rules.json");

#[derive(Debug, Error)]
pub enum RouterError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("routing rules are empty")]
    EmptyRules,
    #[error("invalid pattern {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: String },
    #[error("invalid rules file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("routing fallback failed: {0}")]
    Backend(#[from] AgentError),
}

/// One line of the rules file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub pattern: String,
    pub intent: Intent,
}

/// Ordered, case-insensitive pattern→intent rules. First match wins.
#[derive(Debug, Clone)]
pub struct RoutingRules {
    rules: Vec<(Regex, RuleSpec)>,
    default_intent: Intent,
}

impl RoutingRules {
    pub fn new(specs: Vec<RuleSpec>) -> Result<Self, RouterError> {
        if specs.is_empty() {
            return Err(RouterError::EmptyRules);
        }
        let rules = specs
            .into_iter()
            .map(|spec| {
                RegexBuilder::new(&spec.pattern)
                    .case_insensitive(true)
                    .build()
                    .map(|re| (re, spec.clone()))
                    .map_err(|e| RouterError::InvalidPattern {
                        pattern: spec.pattern.clone(),
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            rules,
            default_intent: Intent::TextKnowledgeQA,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, RouterError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn specs(&self) -> impl Iterator<Item = &RuleSpec> {
        self.rules.iter().map(|(_, s)| s)
    }

    pub fn default_intent(&self) -> Intent {
        self.default_intent
    }

    /// Index of the first matching rule.
    pub fn first_match(&self, text: &str) -> Option<usize> {
        self.rules.iter().position(|(re, _)| re.is_match(text))
    }
}

impl Default for RoutingRules {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES_JSON).expect("bundled rules are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteSource {
    Rule(usize),
    Default,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteDecision {
    pub intent: Intent,
    pub source: RouteSource,
}

pub fn classify_intent(query_text: &str, rules: &RoutingRules) -> Result<Intent, RouterError> {
    classify_traced(query_text, rules).map(|d| d.intent)
}

/// Like [`classify_intent`] but also reports which rule fired.
pub fn classify_traced(query_text: &str, rules: &RoutingRules) -> Result<RouteDecision, RouterError> {
    if query_text.trim().is_empty() {
        return Err(RouterError::EmptyQuery);
    }
    Ok(match rules.first_match(query_text) {
        Some(i) => RouteDecision {
            intent: rules.rules[i].1.intent,
            source: RouteSource::Rule(i),
        },
        None => RouteDecision {
            intent: rules.default_intent,
            source: RouteSource::Default,
        },
    })
}

/// Rules first; when none match and a backend is given, the Orchestrator
/// classifies.
pub fn route(
    query_text: &str,
    rules: &RoutingRules,
    fallback: Option<(&dyn AgentBackend, &str)>,
) -> Result<RouteDecision, RouterError> {
    let decision = classify_traced(query_text, rules)?;
    let (RouteSource::Default, Some((backend, request_id))) = (decision.source, fallback) else {
        return Ok(decision);
    };
    let req = AgentRequest::orchestrator(request_id, OrchestratorTask::ClassifyIntent, query_text, "");
    let RoleResponse::Orchestrator(o) = invoke(backend, &req)? else {
        unreachable!("invoke guarantees the requested role");
    };
    let intent = match o.branch {
        OrchestratorBranch::TextAnswer => Intent::TextKnowledgeQA,
        OrchestratorBranch::VideoReasoning => Intent::VideoRallyQA,
        OrchestratorBranch::SummarizationPlan => Intent::VideoSummarization,
    };
    Ok(RouteDecision {
        intent,
        source: RouteSource::Fallback,
    })
}

pub fn select_policy(intent: Intent) -> PolicyPlan {
    use PolicyStep::*;
    let steps = match intent {
        Intent::VideoRallyQA => vec![Route, Retrieve, OrchestratorReason, CriticVerify, SynthesizeAnswer],
        Intent::VideoSummarization => vec![
            Route,
            OrchestratorReason,
            GroundBatch,
            CriticVerify,
            ComposeScript,
            ComposeMedia,
        ],
        Intent::TextKnowledgeQA => vec![Route, OrchestratorReason],
    };
    PolicyPlan::new(intent, steps)
}

/// The plan with the verification step removed, for ablation runs.
pub fn select_policy_without_critic(intent: Intent) -> PolicyPlan {
    let plan = select_policy(intent);
    let steps = plan
        .steps()
        .iter()
        .copied()
        .filter(|s| *s != PolicyStep::CriticVerify)
        .collect();
    PolicyPlan::new(intent, steps)
}
