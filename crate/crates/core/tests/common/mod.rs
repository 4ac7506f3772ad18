//! Test doubles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rallyscope::agents::context::{feedback_rounds, rally_refs};
use rallyscope::agents::{
    AgentBackend, AgentError, AgentRequest, EventSpec, GrounderResponse, OracleBackend, OrchestratorBranch,
    OrchestratorResponse, OrchestratorTask, Role, RoleResponse,
};
use rallyscope::domain::{MatchRecord, RallyRef, StrokeRef, StrokeType};
use rallyscope::ingest::MatchStore;
use rallyscope::simulate::{simulate_match, SimConfig};

pub fn oracle(store: &Arc<MatchStore>) -> OracleBackend {
    OracleBackend::new(store.clone())
}

pub fn random_matches(n: usize, cfg: SimConfig, seed: u64) -> Vec<MatchRecord> {
    (0..n)
        .map(|i| simulate_match(&format!("m{i:03}"), cfg, seed.wrapping_mul(7919).wrapping_add(i as u64)).unwrap())
        .collect()
}

fn hash_of<T: Hash>(x: &T) -> u64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

/// Delegates after a request-dependent sleep, so completion order differs from
/// submission order. Tracks how many calls are in flight at once.
pub struct LatencyShuffled<B> {
    inner: B,
    salt: u64,
    max_micros: u64,
    in_flight: AtomicUsize,
    pub peak: AtomicUsize,
}

impl<B> LatencyShuffled<B> {
    pub fn new(inner: B, salt: u64, max_micros: u64) -> Self {
        Self {
            inner,
            salt,
            max_micros,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }
}

impl<B: AgentBackend> AgentBackend for LatencyShuffled<B> {
    fn name(&self) -> &str {
        "latency-shuffled"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let micros = hash_of(&(self.salt, &request.request_id)) % self.max_micros.max(1);
        std::thread::sleep(Duration::from_micros(micros));
        let out = self.inner.call(request);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

/// Orchestrator that misnames the stroke type on selected classification
/// questions, until critic feedback is present in its context.
pub struct FaultyOrchestrator {
    pub inner: OracleBackend,
    pub store: Arc<MatchStore>,
    /// (question text, rally) pairs to corrupt.
    pub targets: HashSet<(String, RallyRef)>,
}

impl FaultyOrchestrator {
    fn wrong_answer(&self, request: &AgentRequest) -> Option<String> {
        if request.role != Role::Orchestrator || request.task() != Some(OrchestratorTask::RallyQa) {
            return None;
        }
        if feedback_rounds(&request.context) > 0 {
            return None;
        }
        let question = request.field("Query")?.to_string();
        let rally_ref = rally_refs(&request.context).into_iter().next()?;
        if !self.targets.contains(&(question.clone(), rally_ref.clone())) {
            return None;
        }
        let index: u32 = question
            .split(|c: char| !c.is_ascii_digit())
            .find(|s| !s.is_empty())?
            .parse()
            .ok()?;
        let truth = self.store.rally(&rally_ref)?.stroke(index)?.stroke_type;
        let wrong = wrong_type(truth);
        Some(format!("Stroke {index} is a {}.", wrong.display_name()))
    }
}

/// A stroke type other than `t`, never `Other`.
pub fn wrong_type(t: StrokeType) -> StrokeType {
    let candidates: Vec<StrokeType> = StrokeType::ALL
        .into_iter()
        .filter(|x| *x != t && *x != StrokeType::Other)
        .collect();
    candidates[(t as usize) % candidates.len()]
}

impl AgentBackend for FaultyOrchestrator {
    fn name(&self) -> &str {
        "faulty-orchestrator"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        match self.wrong_answer(request) {
            Some(text) => Ok(RoleResponse::Orchestrator(OrchestratorResponse::answer(
                OrchestratorBranch::VideoReasoning,
                text,
                "misread the stroke",
            ))),
            None => self.inner.call(request),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hallucination {
    /// An existing stroke reported for an event it does not show.
    WrongEvent,
    /// A stroke index past the end of the rally.
    PastEnd,
}

/// Grounder that adds one fabricated stroke to every chunk's report.
pub struct HallucinatingGrounder {
    pub inner: OracleBackend,
    pub store: Arc<MatchStore>,
    pub mode: Hallucination,
    pub injected: Mutex<BTreeSet<StrokeRef>>,
}

impl HallucinatingGrounder {
    pub fn new(store: Arc<MatchStore>, mode: Hallucination) -> Self {
        Self {
            inner: OracleBackend::new(store.clone()),
            store,
            mode,
            injected: Mutex::new(BTreeSet::new()),
        }
    }

    fn fabricate(&self, request: &AgentRequest) -> Option<StrokeRef> {
        let spec = EventSpec::parse(request.field("Query")?)?;
        let rallies: Vec<_> = rally_refs(&request.context)
            .iter()
            .filter_map(|r| self.store.rally(r))
            .collect();
        match self.mode {
            Hallucination::WrongEvent => rallies.iter().find_map(|r| {
                r.strokes
                    .iter()
                    .find(|s| !spec.matches(s.stroke_type, s.player))
                    .map(|s| StrokeRef::new(r.rally_id.clone(), s.stroke_index))
            }),
            Hallucination::PastEnd => rallies
                .first()
                .map(|r| StrokeRef::new(r.rally_id.clone(), r.len() as u32 + 1)),
        }
    }
}

impl AgentBackend for HallucinatingGrounder {
    fn name(&self) -> &str {
        "hallucinating-grounder"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        let response = self.inner.call(request)?;
        if request.role != Role::Grounder {
            return Ok(response);
        }
        let RoleResponse::Grounder(mut g) = response else {
            return Ok(response);
        };
        if let Some(fake) = self.fabricate(request) {
            self.injected.lock().unwrap().insert(fake.clone());
            g.stroke_refs.push(fake);
        }
        Ok(RoleResponse::Grounder(GrounderResponse { stroke_refs: g.stroke_refs }))
    }
}
