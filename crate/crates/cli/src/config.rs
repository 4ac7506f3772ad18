//! Run configuration: input loading, backend selection and exit-code classes.
//! Everything here runs before any output is written.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use rallyscope::agents::{
    AgentBackend, DryRunBackend, Fallback, OracleBackend, RemoteBackend, RemoteConfig, ScriptFixture, ScriptedBackend,
};
use rallyscope::compose::Pads;
use rallyscope::dispatch::DispatchConfig;
use rallyscope::domain::{validate_match, MatchRecord, Query};
use rallyscope::ingest::{build_matches, parse_annotations, MatchStore};
use rallyscope::jsonl::read_jsonl;
use rallyscope::policy::{PolicyOptions, SummarizeConfig};
use rallyscope::router::RoutingRules;

use crate::EngineArgs;

pub const REMOTE_ENV: &str = "COACH_REMOTE_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Backend,
}

impl FailureKind {
    pub fn code(self) -> u8 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Backend => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

pub trait Classify<T> {
    fn or_fail(self, kind: FailureKind) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail(self, kind: FailureKind) -> Result<T, Failure> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
}

pub fn fail(kind: FailureKind, error: anyhow::Error) -> Failure {
    Failure { kind, error }
}

pub fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot read {}", path.display()))
        .or_fail(FailureKind::Config)
}

/// Annotations CSV, or a `.jsonl` match store written by `ingest`.
pub fn load_matches(path: &Path) -> Result<Vec<MatchRecord>, Failure> {
    let reader = open(path)?;
    let is_store = path.extension().is_some_and(|e| e == "jsonl");
    let matches = if is_store {
        let matches: Vec<MatchRecord> = read_jsonl(reader)
            .with_context(|| format!("reading {}", path.display()))
            .or_fail(FailureKind::Data)?;
        let violations: Vec<String> = matches
            .iter()
            .flat_map(|m| validate_match(m).into_iter().map(move |v| format!("match {}: {v}", m.match_id)))
            .collect();
        if !violations.is_empty() {
            return Err(fail(FailureKind::Data, anyhow!("invariant violations:\n{}", violations.join("\n"))));
        }
        matches
    } else {
        let rows = parse_annotations(reader)
            .with_context(|| format!("parsing {}", path.display()))
            .or_fail(FailureKind::Data)?;
        build_matches(rows).or_fail(FailureKind::Data)?
    };
    Ok(matches)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>, Failure> {
    let queries: Vec<Query> = read_jsonl(open(path)?)
        .with_context(|| format!("reading {}", path.display()))
        .or_fail(FailureKind::Data)?;
    for q in &queries {
        q.validate().map_err(|e| fail(FailureKind::Data, anyhow!(e)))?;
    }
    Ok(queries)
}

pub fn load_rules(path: Option<&Path>) -> Result<RoutingRules, Failure> {
    match path {
        None => Ok(RoutingRules::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .or_fail(FailureKind::Config)?;
            RoutingRules::from_json(&text)
                .with_context(|| format!("rules file {}", p.display()))
                .or_fail(FailureKind::Config)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle,
    Scripted(PathBuf),
    Remote(String),
}

impl BackendSpec {
    /// Parses `--backend`; the environment endpoint overrides a remote URL.
    pub fn parse(s: &str, env_endpoint: Option<String>) -> Result<Self, Failure> {
        let spec = match s.split_once(':') {
            None if s == "oracle" => BackendSpec::Oracle,
            Some(("scripted", path)) if !path.is_empty() => BackendSpec::Scripted(PathBuf::from(path)),
            Some(("remote", url)) => BackendSpec::Remote(url.to_string()),
            None if s == "remote" => BackendSpec::Remote(String::new()),
            _ => {
                return Err(fail(
                    FailureKind::Config,
                    anyhow!("unknown backend {s:?}; expected oracle, scripted:<path> or remote:<url>"),
                ))
            }
        };
        Ok(match spec {
            BackendSpec::Remote(url) => {
                let url = env_endpoint.filter(|e| !e.is_empty()).unwrap_or(url);
                if url.is_empty() {
                    return Err(fail(FailureKind::Config, anyhow!("remote backend needs an endpoint URL")));
                }
                BackendSpec::Remote(url)
            }
            other => other,
        })
    }
}

/// Everything an agent-running command needs, validated.
pub struct Prepared {
    pub store: Arc<MatchStore>,
    pub rules: RoutingRules,
    pub backend: Arc<dyn AgentBackend>,
    pub config: SummarizeConfig,
}

fn check_knobs(args: &EngineArgs) -> Result<(), Failure> {
    let bad = |msg: &str| Err(fail(FailureKind::Config, anyhow!("{msg}")));
    if args.parallelism == 0 {
        return bad("--parallelism must be at least 1");
    }
    if args.max_chunk_strokes == 0 {
        return bad("--max-chunk-strokes must be at least 1");
    }
    let pads = Pads {
        before_s: args.pad_before,
        after_s: args.pad_after,
    };
    if pads.validate().is_err() {
        return bad("pads must be finite and non-negative");
    }
    if !(args.timeout_s.is_finite() && args.timeout_s > 0.0) {
        return bad("--timeout-s must be positive");
    }
    Ok(())
}

fn load_knowledge(path: Option<&Path>) -> Result<BTreeMap<String, String>, Failure> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    Ok(load_queries(path)?
        .into_iter()
        .filter_map(|q| q.gold_answer.map(|a| (q.text, a)))
        .collect())
}

/// Validates configuration, loads inputs and builds the backend.
pub fn prepare(annotations: &Path, args: &EngineArgs) -> Result<Prepared, Failure> {
    check_knobs(args)?;
    let spec = BackendSpec::parse(&args.backend, std::env::var(REMOTE_ENV).ok())?;
    let rules = load_rules(args.rules.as_deref())?;
    let fixture = match &spec {
        BackendSpec::Scripted(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .or_fail(FailureKind::Config)?;
            Some(ScriptFixture::from_json(&text).or_fail(FailureKind::Config)?)
        }
        _ => None,
    };
    let _ = open(annotations)?;
    if let Some(k) = &args.knowledge {
        let _ = open(k)?;
    }

    let store = Arc::new(MatchStore::new(load_matches(annotations)?));
    let knowledge = load_knowledge(args.knowledge.as_deref())?;
    let oracle = OracleBackend::new(store.clone()).with_knowledge(knowledge);
    let backend: Arc<dyn AgentBackend> = match (spec, args.dry_run) {
        (BackendSpec::Oracle, false) => Arc::new(oracle),
        (BackendSpec::Remote(url), false) => Arc::new(RemoteBackend::new(RemoteConfig {
            endpoint: url,
            timeout: Duration::from_secs_f64(args.timeout_s),
            retries: args.retries,
        })),
        (BackendSpec::Scripted(_), dry) => {
            let fixture = fixture.expect("loaded above");
            let fallback: Option<Arc<dyn AgentBackend>> =
                (fixture.fallback == Fallback::Oracle).then(|| Arc::new(oracle) as Arc<dyn AgentBackend>);
            let scripted = ScriptedBackend::new(fixture, fallback);
            if dry {
                Arc::new(DryRunBackend::new(scripted, Box::new(std::io::stderr())))
            } else {
                Arc::new(scripted)
            }
        }
        (BackendSpec::Oracle | BackendSpec::Remote(_), true) => {
            Arc::new(DryRunBackend::new(oracle, Box::new(std::io::stderr())))
        }
    };
    let config = SummarizeConfig {
        dispatch: DispatchConfig {
            max_chunk_strokes: args.max_chunk_strokes,
            parallelism: args.parallelism,
            per_call_timeout_s: args.timeout_s,
        },
        pads: Pads {
            before_s: args.pad_before,
            after_s: args.pad_after,
        },
        options: PolicyOptions {
            max_rounds: args.max_rounds,
            critic: !args.no_critic,
        },
        source_video: None,
    };
    Ok(Prepared {
        store,
        rules,
        backend,
        config,
    })
}

/// Creates `dir` and writes every file; nothing is written before this point.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_fail(FailureKind::Config)?;
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content)
            .with_context(|| format!("writing {}", path.display()))
            .or_fail(FailureKind::Config)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_specs() {
        assert_eq!(BackendSpec::parse("oracle", None).unwrap(), BackendSpec::Oracle);
        assert_eq!(
            BackendSpec::parse("scripted:f.json", None).unwrap(),
            BackendSpec::Scripted(PathBuf::from("f.json"))
        );
        assert_eq!(
            BackendSpec::parse("remote:http://a", Some("http://b".into())).unwrap(),
            BackendSpec::Remote("http://b".into())
        );
        assert_eq!(
            BackendSpec::parse("remote:http://a", None).unwrap(),
            BackendSpec::Remote("http://a".into())
        );
        assert_eq!(BackendSpec::parse("gpt", None).unwrap_err().kind, FailureKind::Config);
        assert_eq!(BackendSpec::parse("remote", None).unwrap_err().kind, FailureKind::Config);
    }
}
