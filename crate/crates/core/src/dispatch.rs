//! Rally-aligned chunking and bounded-parallel Grounder fan-out.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::context::rallies_context;
use crate::agents::{invoke, AgentBackend, AgentRequest, RoleResponse};
use crate::domain::{normalize_refs, GroundingResult, MatchRecord, StrokeRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("rally {rally_id} has {strokes} strokes, more than max_chunk_strokes {max}")]
    RallyTooLarge { rally_id: String, strokes: usize, max: usize },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("every one of {0} grounding cells failed; first: {1}")]
    FullBatchFailure(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchConfig {
    pub max_chunk_strokes: usize,
    pub parallelism: usize,
    /// Handed to backends that enforce their own deadline.
    pub per_call_timeout_s: f64,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            max_chunk_strokes: 64,
            parallelism: 4,
            per_call_timeout_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub rally_refs: Vec<String>,
    pub stroke_count: usize,
}

/// Greedy in-order packing of whole rallies.
pub fn chunk_match(m: &MatchRecord, max_chunk_strokes: usize) -> Result<Vec<Chunk>, DispatchError> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut current: Option<Chunk> = None;
    for rally in &m.rallies {
        let n = rally.len();
        if n > max_chunk_strokes {
            return Err(DispatchError::RallyTooLarge {
                rally_id: rally.rally_id.clone(),
                strokes: n,
                max: max_chunk_strokes,
            });
        }
        let fits = current.as_ref().is_some_and(|c| c.stroke_count + n <= max_chunk_strokes);
        if !fits {
            chunks.extend(current.take());
            current = Some(Chunk {
                chunk_id: format!("c{:03}", chunks.len()),
                rally_refs: Vec::new(),
                stroke_count: 0,
            });
        }
        let c = current.as_mut().expect("chunk open");
        c.rally_refs.push(rally.rally_id.clone());
        c.stroke_count += n;
    }
    chunks.extend(current);
    Ok(chunks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCell {
    pub sub_query_id: String,
    pub chunk_id: String,
    pub reason: String,
}

/// Cell outcomes in (sub-query, chunk) order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub results: Vec<GroundingResult>,
    pub failures: Vec<FailedCell>,
}

pub fn sub_query_id(index: usize) -> String {
    format!("sq{index:02}")
}

/// Grounds every (sub-query, chunk) cell with at most `parallelism` calls in
/// flight. Request ids are `{id_prefix}-{sub_query_id}-{chunk_id}`.
type CellOutcome = Result<Vec<StrokeRef>, String>;

pub fn dispatch_batch(
    m: &MatchRecord,
    chunks: &[Chunk],
    sub_queries: &[String],
    grounder: &dyn AgentBackend,
    parallelism: usize,
    id_prefix: &str,
) -> Result<BatchOutcome, DispatchError> {
    if parallelism == 0 {
        return Err(DispatchError::ZeroParallelism);
    }
    let cells: Vec<(usize, &Chunk)> = (0..sub_queries.len())
        .flat_map(|q| chunks.iter().map(move |c| (q, c)))
        .collect();
    let slots: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);

    let run_cell = |q: usize, chunk: &Chunk| -> Result<Vec<StrokeRef>, String> {
        let rallies = chunk.rally_refs.iter().filter_map(|id| m.rally(id));
        let req = AgentRequest::grounder(
            format!("{id_prefix}-{}-{}", sub_query_id(q), chunk.chunk_id),
            &sub_queries[q],
            rallies_context(rallies),
        );
        let RoleResponse::Grounder(g) = invoke(grounder, &req).map_err(|e| e.to_string())? else {
            unreachable!("invoke guarantees the requested role");
        };
        if let Some(stray) = g.stroke_refs.iter().find(|r| !chunk.rally_refs.contains(&r.rally_id)) {
            return Err(format!("reference {stray} lies outside chunk {}", chunk.chunk_id));
        }
        let mut refs = g.stroke_refs;
        normalize_refs(&mut refs, m);
        Ok(refs)
    };

    std::thread::scope(|s| {
        for _ in 0..parallelism.min(cells.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(q, chunk)) = cells.get(i) else { break };
                let outcome = run_cell(q, chunk);
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(outcome);
            });
        }
    });

    let mut outcome = BatchOutcome {
        results: Vec::new(),
        failures: Vec::new(),
    };
    let slots = slots.into_inner().unwrap_or_else(|p| p.into_inner());
    for ((q, chunk), slot) in cells.iter().zip(slots) {
        let sub_query_id = sub_query_id(*q);
        let chunk_id = chunk.chunk_id.clone();
        match slot.expect("every cell ran") {
            Ok(stroke_refs) => outcome.results.push(GroundingResult {
                sub_query_id,
                chunk_id,
                stroke_refs,
            }),
            Err(reason) => outcome.failures.push(FailedCell {
                sub_query_id,
                chunk_id,
                reason,
            }),
        }
    }
    if !cells.is_empty() && outcome.results.is_empty() {
        return Err(DispatchError::FullBatchFailure(
            cells.len(),
            outcome.failures[0].reason.clone(),
        ));
    }
    Ok(outcome)
}

/// Per sub-query union of chunk results, in rally then stroke order.
pub fn merge_results(results: &[GroundingResult], m: &MatchRecord) -> BTreeMap<String, Vec<StrokeRef>> {
    let mut sets: BTreeMap<String, BTreeSet<StrokeRef>> = BTreeMap::new();
    for r in results {
        sets.entry(r.sub_query_id.clone())
            .or_default()
            .extend(r.stroke_refs.iter().cloned());
    }
    sets.into_iter()
        .map(|(k, set)| {
            let mut refs: Vec<StrokeRef> = set.into_iter().collect();
            normalize_refs(&mut refs, m);
            (k, refs)
        })
        .collect()
}
