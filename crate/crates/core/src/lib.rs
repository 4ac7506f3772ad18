//! Policy-driven multi-agent engine for stroke-level badminton analysis.
//!
//! Three agent roles (Orchestrator, Grounder, Critic) share one backend
//! handle and execute fixed plans selected by intent: verified rally
//! question answering, and highlight summarization that grounds events
//! chunk by chunk, filters them through the Critic and emits an edit
//! decision list. A deterministic oracle backend answers from the
//! annotations, which makes the whole pipeline testable end to end.
//!
//! Metrics are generic over [`Scalar`]: `f64` for reporting, `f32`, or
//! [`Rational`] for exact aggregation.

pub mod agents;
pub mod compose;
pub mod dispatch;
pub mod domain;
pub mod ingest;
pub mod jsonl;
pub mod lexicon;
pub mod metrics;
pub mod policy;
pub mod router;
pub mod scalar;
pub mod simulate;

pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;
/// Stroke-level precision/recall/F1 in `f64`.
pub type Prf = metrics::PrfScores<f64>;
/// Stroke-level precision/recall/F1 computed exactly.
pub type ExactPrf = metrics::PrfScores<Rational>;
