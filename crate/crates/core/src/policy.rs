//! Execution of the fixed collaboration plans.
//!
//! Rally QA: the Orchestrator answers from the rally captions, the Critic
//! adjudicates each extracted claim, and rejected claims send their evidence
//! back for a bounded number of revisions. Summarization: the Orchestrator
//! decomposes the request, the Grounder localizes each sub-query chunk by
//! chunk, the Critic vets every grounded stroke, and the survivors become a
//! narrated script and an edit decision list.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::context::{rally_block, with_feedback};
use crate::agents::oracle::{narrate, script_title};
use crate::agents::{
    extract_claims, invoke, AgentError, AgentRequest, Backends, Claim, CriticResponse, EventSpec,
    OrchestratorBranch, OrchestratorResponse, OrchestratorTask, Role, RoleResponse, ScriptGroup,
};
use crate::compose::{build_edl, ComposeError, EditDecisionList, Pads, ScriptLine, SummaryScript};
use crate::dispatch::{chunk_match, dispatch_batch, merge_results, sub_query_id, DispatchConfig, DispatchError, FailedCell};
use crate::domain::{Intent, MatchRecord, PolicyPlan, PolicyStep, Query, Rally, RallyRef, StrokeRef, Verdict};
use crate::ingest::MatchStore;
use crate::router::{route, select_policy, select_policy_without_critic, RouterError, RoutingRules};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("orchestrator answered with branch {got:?}, expected {expected:?}")]
    UnexpectedBranch {
        expected: OrchestratorBranch,
        got: OrchestratorBranch,
    },
    #[error("summarization plan has no sub-queries")]
    NoSubQueries,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Route(#[from] RouterError),
    #[error("no rally found for query {0}")]
    NoRally(String),
    #[error("no match found for query {0}")]
    NoMatch(String),
    #[error("unknown rally {0}")]
    UnknownRally(RallyRef),
}

impl PolicyError {
    /// Failures caused by a backend rather than by the data.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            PolicyError::Agent(_)
                | PolicyError::UnexpectedBranch { .. }
                | PolicyError::NoSubQueries
                | PolicyError::Dispatch(DispatchError::FullBatchFailure(..))
                | PolicyError::Route(RouterError::Backend(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub execution_id: String,
    pub step: PolicyStep,
    pub role: Option<Role>,
    pub request_id: Option<String>,
    pub summary: String,
}

/// Ordered record of one execution. Request ids are derived from the
/// execution id, so identical runs give identical traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    execution_id: String,
    events: Vec<TraceEvent>,
    issued: usize,
}

impl Trace {
    pub fn new(execution_id: impl Into<String>) -> Self {
        Self {
            execution_id: execution_id.into(),
            events: Vec::new(),
            issued: 0,
        }
    }

    pub fn execution_id(&self) -> &str {
        &self.execution_id
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn next_request_id(&mut self) -> String {
        self.issued += 1;
        format!("{}-{:03}", self.execution_id, self.issued)
    }

    pub fn record(&mut self, step: PolicyStep, role: Option<Role>, request_id: Option<String>, summary: impl Into<String>) {
        self.events.push(TraceEvent {
            execution_id: self.execution_id.clone(),
            step,
            role,
            request_id,
            summary: summary.into(),
        });
    }

    pub fn steps(&self) -> Vec<PolicyStep> {
        self.events.iter().map(|e| e.step).collect()
    }

    /// Checks that the steps walk the plan in order: each event repeats the
    /// current step or moves to the next, and the only backward move is from
    /// verification to a fresh Orchestrator answer.
    pub fn conforms_to(&self, plan: &PolicyPlan) -> Result<(), String> {
        let steps = plan.steps();
        let mut pos: Option<usize> = None;
        for (i, e) in self.events.iter().enumerate() {
            let next = pos.map_or(0, |p| p + 1);
            match pos {
                Some(p) if steps[p] == e.step => {}
                _ if steps.get(next) == Some(&e.step) => pos = Some(next),
                Some(p)
                    if steps[p] == PolicyStep::CriticVerify
                        && e.step == PolicyStep::OrchestratorReason
                        && p > 0
                        && steps[p - 1] == PolicyStep::OrchestratorReason =>
                {
                    pos = Some(p - 1)
                }
                _ => return Err(format!("event {i} ({}) breaks the plan", e.step)),
            }
        }
        match pos {
            Some(p) if p + 1 == steps.len() => Ok(()),
            _ => Err(format!("execution stopped before the final step {}", steps.last().map_or("-".to_string(), |s| s.to_string()))),
        }
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyOptions {
    pub max_rounds: usize,
    /// When false the verification step is skipped entirely.
    pub critic: bool,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        Self {
            max_rounds: 2,
            critic: true,
        }
    }
}

impl PolicyOptions {
    pub fn plan(&self, intent: Intent) -> PolicyPlan {
        if self.critic {
            select_policy(intent)
        } else {
            select_policy_without_critic(intent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    Verified,
    UnresolvedAfterMaxRounds,
    /// Produced with verification disabled.
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjudication {
    pub round: usize,
    pub claim: Claim,
    pub verdict: Verdict,
    pub evidence_cited: Vec<StrokeRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedAnswer {
    pub answer_text: String,
    /// Verdicts on the final answer's claims.
    pub claims: Vec<(Claim, Verdict)>,
    /// Every adjudication across all rounds.
    pub history: Vec<Adjudication>,
    pub revision_rounds_used: usize,
    pub status: AnswerStatus,
}

fn call(
    backends: &Backends,
    trace: &mut Trace,
    step: PolicyStep,
    request: AgentRequest,
) -> Result<RoleResponse, AgentError> {
    let result = invoke(backends.for_role(request.role), &request);
    let summary = match &result {
        Ok(r) => r.summary(),
        Err(e) => format!("error: {e}"),
    };
    trace.record(step, Some(request.role), Some(request.request_id), summary);
    result
}

fn orchestrate(
    backends: &Backends,
    trace: &mut Trace,
    task: OrchestratorTask,
    query: &str,
    context: String,
) -> Result<OrchestratorResponse, PolicyError> {
    let id = trace.next_request_id();
    let request = AgentRequest::orchestrator(id, task, query, context);
    let RoleResponse::Orchestrator(o) = call(backends, trace, PolicyStep::OrchestratorReason, request)? else {
        unreachable!("invoke guarantees the requested role");
    };
    if let Some(expected) = task.expected_branch() {
        if o.branch != expected {
            return Err(PolicyError::UnexpectedBranch {
                expected,
                got: o.branch,
            });
        }
    }
    Ok(o)
}

fn adjudicate(
    backends: &Backends,
    trace: &mut Trace,
    claim: &Claim,
    rally: &Rally,
) -> Result<CriticResponse, PolicyError> {
    let id = trace.next_request_id();
    let request = AgentRequest::critic(id, claim, rally_block(rally));
    let RoleResponse::Critic(c) = call(backends, trace, PolicyStep::CriticVerify, request)? else {
        unreachable!("invoke guarantees the requested role");
    };
    Ok(c)
}

/// Answers a rally question, revising up to `max_rounds` times on rejected claims.
pub fn run_rally_qa(
    query: &Query,
    rally: &Rally,
    backends: &Backends,
    options: &PolicyOptions,
    trace: &mut Trace,
) -> Result<VerifiedAnswer, PolicyError> {
    trace.record(PolicyStep::Route, None, None, Intent::VideoRallyQA.to_string());
    trace.record(PolicyStep::Retrieve, None, None, format!("rally {}", rally.rally_ref()));
    let base = rally_block(rally);
    let mut context = base.clone();
    let mut history = Vec::new();
    let mut round = 0;
    loop {
        let response = orchestrate(backends, trace, OrchestratorTask::RallyQa, &query.text, context.clone())?;
        let answer_text = response.answer.unwrap_or_default();
        if !options.critic {
            trace.record(PolicyStep::SynthesizeAnswer, None, None, answer_text.clone());
            return Ok(VerifiedAnswer {
                answer_text,
                claims: Vec::new(),
                history,
                revision_rounds_used: 0,
                status: AnswerStatus::Unverified,
            });
        }
        let claims = extract_claims(&answer_text, rally);
        if claims.is_empty() {
            trace.record(PolicyStep::CriticVerify, None, None, "no checkable claims");
        }
        let mut verdicts = Vec::new();
        for claim in claims {
            let c = adjudicate(backends, trace, &claim, rally)?;
            history.push(Adjudication {
                round,
                claim: claim.clone(),
                verdict: c.verdict.clone(),
                evidence_cited: c.evidence_cited,
            });
            verdicts.push((claim, c.verdict));
        }
        let notes: Vec<String> = verdicts
            .iter()
            .filter_map(|(_, v)| v.note().map(str::to_string))
            .collect();
        let status = if notes.is_empty() {
            Some(AnswerStatus::Verified)
        } else if round == options.max_rounds {
            Some(AnswerStatus::UnresolvedAfterMaxRounds)
        } else {
            None
        };
        if let Some(status) = status {
            trace.record(
                PolicyStep::SynthesizeAnswer,
                None,
                None,
                format!("{status:?}: {answer_text}"),
            );
            return Ok(VerifiedAnswer {
                answer_text,
                claims: verdicts,
                history,
                revision_rounds_used: round,
                status,
            });
        }
        round += 1;
        context = with_feedback(&context, round, &notes);
        debug_assert!(context.starts_with(&base));
    }
}

/// One Orchestrator call answering from its own knowledge.
pub fn run_text_qa(query: &Query, backends: &Backends, trace: &mut Trace) -> Result<String, PolicyError> {
    trace.record(PolicyStep::Route, None, None, Intent::TextKnowledgeQA.to_string());
    let o = orchestrate(backends, trace, OrchestratorTask::TextQa, &query.text, String::new())?;
    Ok(o.answer.unwrap_or_default())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummarizeConfig {
    pub dispatch: DispatchConfig,
    pub pads: Pads,
    pub options: PolicyOptions,
    /// Defaults to `<match_id>.mp4`.
    pub source_video: Option<String>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedStroke {
    pub sub_query: String,
    pub stroke: StrokeRef,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryOutcome {
    pub script: SummaryScript,
    pub edl: EditDecisionList,
    pub failed_cells: Vec<FailedCell>,
    pub rejected: Vec<RejectedStroke>,
}

fn parse_script_answer(answer: &str) -> (Option<String>, BTreeMap<usize, String>) {
    static LINE: OnceLock<Regex> = OnceLock::new();
    let re = LINE.get_or_init(|| Regex::new(r"^(\d+):\s*(.+)$").expect("valid regex"));
    let mut title = None;
    let mut lines = BTreeMap::new();
    for line in answer.lines().map(str::trim) {
        if let Some(t) = line.strip_prefix("Title:") {
            title = Some(t.trim().to_string()).filter(|t| !t.is_empty());
        } else if let Some(c) = re.captures(line) {
            if let Ok(k) = c[1].parse() {
                lines.entry(k).or_insert_with(|| c[2].to_string());
            }
        }
    }
    (title, lines)
}

/// Decomposes, grounds, verifies and composes a highlight summary of one match.
pub fn run_summarization(
    request: &Query,
    m: &MatchRecord,
    backends: &Backends,
    config: &SummarizeConfig,
    trace: &mut Trace,
) -> Result<SummaryOutcome, PolicyError> {
    trace.record(PolicyStep::Route, None, None, Intent::VideoSummarization.to_string());
    let overview = format!(
        "[match {}] {} rallies, {} strokes",
        m.match_id,
        m.rallies.len(),
        m.stroke_count()
    );
    let plan = orchestrate(backends, trace, OrchestratorTask::SummaryPlan, &request.text, overview)?;
    let sub_queries = plan.sub_queries.unwrap_or_default();
    if sub_queries.is_empty() {
        return Err(PolicyError::NoSubQueries);
    }

    let chunks = chunk_match(m, config.dispatch.max_chunk_strokes)?;
    let prefix = format!("{}-ground", trace.execution_id());
    let batch = dispatch_batch(
        m,
        &chunks,
        &sub_queries,
        backends.grounder.as_ref(),
        config.dispatch.parallelism,
        &prefix,
    )?;
    if chunks.is_empty() {
        trace.record(PolicyStep::GroundBatch, None, None, "match has no rallies");
    }
    for r in &batch.results {
        let refs: Vec<String> = r.stroke_refs.iter().map(ToString::to_string).collect();
        trace.record(
            PolicyStep::GroundBatch,
            Some(Role::Grounder),
            Some(format!("{prefix}-{}-{}", r.sub_query_id, r.chunk_id)),
            format!("[{}]", refs.join(", ")),
        );
    }
    for f in &batch.failures {
        trace.record(
            PolicyStep::GroundBatch,
            Some(Role::Grounder),
            Some(format!("{prefix}-{}-{}", f.sub_query_id, f.chunk_id)),
            format!("failed: {}", f.reason),
        );
    }
    let merged = merge_results(&batch.results, m);

    // Verification, per sub-query in plan order.
    let mut rejected = Vec::new();
    let mut groups: Vec<ScriptGroup> = Vec::new();
    let mut verified_any_call = false;
    for (q, sub_query) in sub_queries.iter().enumerate() {
        let refs = merged.get(&sub_query_id(q)).cloned().unwrap_or_default();
        let spec = EventSpec::parse(sub_query);
        let mut survivors: Vec<StrokeRef> = Vec::new();
        for stroke in refs {
            if !config.options.critic {
                survivors.push(stroke);
                continue;
            }
            let rally = m.rally(&stroke.rally_id).expect("dispatch keeps refs inside the match");
            let verdict = match spec {
                None => Verdict::Insufficient {
                    note: format!("sub-query {sub_query:?} names no stroke type to check"),
                },
                Some(spec) => {
                    let claim = Claim::HasStrokeType {
                        rally_id: stroke.rally_id.clone(),
                        stroke_index: stroke.stroke_index,
                        stroke_type: spec.stroke_type,
                        player: spec.player,
                    };
                    verified_any_call = true;
                    adjudicate(backends, trace, &claim, rally)?.verdict
                }
            };
            if verdict.is_supported() {
                survivors.push(stroke);
            } else {
                rejected.push(RejectedStroke {
                    sub_query: sub_query.clone(),
                    stroke,
                    verdict,
                });
            }
        }
        for s in survivors {
            match groups.last_mut() {
                Some(g) if g.sub_query == *sub_query && g.rally_id == s.rally_id => {
                    g.strokes.insert(s.stroke_index);
                }
                _ => groups.push(ScriptGroup {
                    sub_query: sub_query.clone(),
                    match_id: m.match_id.clone(),
                    rally_id: s.rally_id.clone(),
                    strokes: [s.stroke_index].into_iter().collect(),
                }),
            }
        }
    }
    if config.options.critic && !verified_any_call {
        trace.record(
            PolicyStep::CriticVerify,
            None,
            None,
            format!("{} strokes rejected without a critic call", rejected.len()),
        );
    }

    let script = if groups.is_empty() {
        trace.record(PolicyStep::ComposeScript, None, None, "no verified strokes");
        SummaryScript {
            title: script_title(&request.text),
            lines: Vec::new(),
        }
    } else {
        let context: Vec<String> = groups.iter().enumerate().map(|(k, g)| g.render(k + 1)).collect();
        let id = trace.next_request_id();
        let req = AgentRequest::orchestrator(id, OrchestratorTask::SummaryScript, &request.text, context.join("\n"));
        let RoleResponse::Orchestrator(o) = call(backends, trace, PolicyStep::ComposeScript, req)? else {
            unreachable!("invoke guarantees the requested role");
        };
        if o.branch != OrchestratorBranch::VideoReasoning {
            return Err(PolicyError::UnexpectedBranch {
                expected: OrchestratorBranch::VideoReasoning,
                got: o.branch,
            });
        }
        let (title, mut narrations) = parse_script_answer(o.answer.as_deref().unwrap_or_default());
        SummaryScript {
            title: title.unwrap_or_else(|| script_title(&request.text)),
            lines: groups
                .iter()
                .enumerate()
                .map(|(k, g)| ScriptLine {
                    narration: narrations
                        .remove(&(k + 1))
                        .unwrap_or_else(|| narrate(g, m.rally(&g.rally_id))),
                    stroke_refs: g
                        .strokes
                        .iter()
                        .map(|&i| StrokeRef::new(g.rally_id.clone(), i))
                        .collect(),
                })
                .collect(),
        }
    };

    let source = config
        .source_video
        .clone()
        .unwrap_or_else(|| format!("{}.mp4", m.match_id));
    let edl = build_edl(m, &script, config.pads, &source)?;
    trace.record(
        PolicyStep::ComposeMedia,
        None,
        None,
        format!("{} entries, {:.3} s", edl.entries.len(), edl.total_duration_s()),
    );
    Ok(SummaryOutcome {
        script,
        edl,
        failed_cells: batch.failures,
        rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineOutput {
    Text { answer: String },
    Rally(VerifiedAnswer),
    Summary(SummaryOutcome),
}

impl EngineOutput {
    /// The text a user sees: the answer, or the script rendered line by line.
    pub fn display_text(&self) -> String {
        match self {
            EngineOutput::Text { answer } => answer.clone(),
            EngineOutput::Rally(v) => v.answer_text.clone(),
            EngineOutput::Summary(s) => {
                let mut out = s.script.title.clone();
                for l in &s.script.lines {
                    out.push('\n');
                    out.push_str(&l.narration);
                }
                out
            }
        }
    }
}

/// Routes queries and runs the selected plan against a store of matches.
#[derive(Debug, Clone)]
pub struct Engine {
    pub store: Arc<MatchStore>,
    pub rules: RoutingRules,
    pub backends: Backends,
    pub config: SummarizeConfig,
    /// Ask the Orchestrator when no routing rule matches.
    pub route_fallback: bool,
}

impl Engine {
    pub fn new(store: Arc<MatchStore>, backends: Backends) -> Self {
        Self {
            store,
            rules: RoutingRules::default(),
            backends,
            config: SummarizeConfig::default(),
            route_fallback: false,
        }
    }

    fn find_rally(&self, query: &Query) -> Result<&Rally, PolicyError> {
        if let Some(r) = &query.rally_ref {
            return self.store.rally(r).ok_or_else(|| PolicyError::UnknownRally(r.clone()));
        }
        static RALLY: OnceLock<Regex> = OnceLock::new();
        let re = RALLY.get_or_init(|| Regex::new(r"(?i)\brally\s+([A-Za-z0-9_-]+)").expect("valid regex"));
        let not_found = || PolicyError::NoRally(query.query_id.clone());
        let token = re.captures(&query.text).map(|c| c[1].to_string()).ok_or_else(not_found)?;
        let by_id = self.store.matches().iter().find_map(|m| m.rally(&token));
        let by_position = || {
            let n: usize = token.parse().ok()?;
            self.store.matches().first()?.rallies.get(n.checked_sub(1)?)
        };
        by_id.or_else(by_position).ok_or_else(not_found)
    }

    fn find_match(&self, query: &Query) -> Result<&MatchRecord, PolicyError> {
        match &query.rally_ref {
            Some(r) => self
                .store
                .get(&r.match_id)
                .ok_or_else(|| PolicyError::NoMatch(query.query_id.clone())),
            None => match self.store.matches() {
                [only] => Ok(only),
                _ => Err(PolicyError::NoMatch(query.query_id.clone())),
            },
        }
    }

    pub fn plan_for(&self, query: &Query, trace: &mut Trace) -> Result<PolicyPlan, PolicyError> {
        let fallback_id = self.route_fallback.then(|| trace.next_request_id());
        let fallback = fallback_id
            .as_deref()
            .map(|id| (self.backends.orchestrator.as_ref(), id));
        let decision = route(&query.text, &self.rules, fallback)?;
        Ok(self.config.options.plan(decision.intent))
    }

    /// Routes and executes one query. The trace is returned even on failure.
    pub fn run(&self, query: &Query, execution_id: &str) -> (Result<EngineOutput, PolicyError>, Trace) {
        let mut trace = Trace::new(execution_id);
        let result = self.run_traced(query, &mut trace);
        (result, trace)
    }

    fn run_traced(&self, query: &Query, trace: &mut Trace) -> Result<EngineOutput, PolicyError> {
        let plan = self.plan_for(query, trace)?;
        match plan.intent() {
            Intent::TextKnowledgeQA => run_text_qa(query, &self.backends, trace).map(|answer| EngineOutput::Text { answer }),
            Intent::VideoRallyQA => {
                let rally = self.find_rally(query)?;
                run_rally_qa(query, rally, &self.backends, &self.config.options, trace).map(EngineOutput::Rally)
            }
            Intent::VideoSummarization => {
                let m = self.find_match(query)?;
                run_summarization(query, m, &self.backends, &self.config, trace).map(EngineOutput::Summary)
            }
        }
    }
}
