use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context};
use rallyscope::agents::Backends;
use rallyscope::compose::render_command;
use rallyscope::domain::{Query, QueryCategory, RallyRef};
use rallyscope::ingest::{caption_rally, encode_annotations, synthesize_dataset, CaptionLine, QaSynthesizer};
use rallyscope::jsonl::{read_jsonl, to_jsonl};
use rallyscope::metrics::{aggregate, join_predictions, PredictionLine};
use rallyscope::policy::{run_summarization, Engine, EngineOutput, Trace};
use rallyscope::simulate::{simulate_annotations, SimConfig};
use serde::Serialize;

use crate::config::{self, fail, load_matches, load_queries, open, prepare, write_outputs, Classify, Failure, FailureKind};
use crate::EngineArgs;

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

pub fn ingest(annotations: &Path, out: &Path) -> Result<(), Failure> {
    let matches = load_matches(annotations)?;
    let strokes: usize = matches.iter().map(|m| m.stroke_count()).sum();
    write_outputs(out, &[("matches.jsonl", to_jsonl(&matches))])?;
    println!("{} matches, {} strokes", matches.len(), strokes);
    Ok(())
}

pub fn gen_data(
    annotations: &Path,
    out: &Path,
    seed: u64,
    per_rally: usize,
    negative_ratio: f64,
    knowledge: Option<&Path>,
) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&negative_ratio) {
        return Err(fail(FailureKind::Config, anyhow!("--negative-ratio must lie in [0, 1]")));
    }
    if let Some(k) = knowledge {
        open(k)?;
    }
    let matches = load_matches(annotations)?;
    let extra = knowledge.map(load_queries).transpose()?.unwrap_or_default();

    let items = synthesize_dataset(&matches, &QaSynthesizer { negative_ratio }, per_rally, seed);
    let captions: Vec<CaptionLine> = matches
        .iter()
        .flat_map(|m| &m.rallies)
        .map(|r| CaptionLine {
            rally_id: r.rally_id.clone(),
            caption: caption_rally(r),
        })
        .collect();

    let mut counts: BTreeMap<QueryCategory, usize> = BTreeMap::new();
    for q in items.iter().map(|i| &i.query).chain(&extra) {
        *counts.entry(q.category).or_default() += 1;
    }
    let qa = to_jsonl(&items) + &to_jsonl(&extra);
    write_outputs(out, &[("qa.jsonl", qa), ("captions.jsonl", to_jsonl(&captions))])?;
    for (c, n) in counts {
        println!("{c}: {n}");
    }
    Ok(())
}

fn parse_rally_ref(s: &str) -> Result<RallyRef, Failure> {
    match s.split_once('/') {
        Some((m, r)) if !m.is_empty() && !r.is_empty() => Ok(RallyRef {
            match_id: m.to_string(),
            rally_id: r.to_string(),
        }),
        _ => Err(fail(FailureKind::Config, anyhow!("--rally must look like <match_id>/<rally_id>"))),
    }
}

#[derive(Serialize)]
struct AnswerLine {
    query_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<EngineOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn qa(
    annotations: &Path,
    qa_file: Option<&Path>,
    query: Option<&str>,
    rally: Option<&str>,
    args: &EngineArgs,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let rally_ref = rally.map(parse_rally_ref).transpose()?;
    if let Some(p) = qa_file {
        open(p)?;
    }
    let prepared = prepare(annotations, args)?;
    let queries = match (qa_file, query) {
        (Some(p), _) => load_queries(p)?,
        (None, Some(text)) => vec![Query {
            query_id: "q0".into(),
            text: text.to_string(),
            category: QueryCategory::KnowledgeQA,
            gold_answer: None,
            gold_strokes: None,
            rally_ref,
        }],
        (None, None) => return Err(fail(FailureKind::Config, anyhow!("either --qa or --query is required"))),
    };

    let engine = Engine {
        store: prepared.store,
        rules: prepared.rules,
        backends: Backends::shared(prepared.backend),
        config: prepared.config,
        route_fallback: args.route_fallback,
    };

    let mut predictions = Vec::with_capacity(queries.len());
    let mut answers = Vec::with_capacity(queries.len());
    let mut traces = String::new();
    let mut backend_failures = 0usize;
    let mut first_error = None;
    for q in &queries {
        let (result, trace) = engine.run(q, &q.query_id);
        traces.push_str(&trace.to_jsonl());
        let (text, line) = match result {
            Ok(output) => (
                output.display_text(),
                AnswerLine {
                    query_id: q.query_id.clone(),
                    output: Some(output),
                    error: None,
                },
            ),
            Err(e) => {
                if e.is_backend() {
                    backend_failures += 1;
                }
                let msg = e.to_string();
                eprintln!("query {}: {msg}", q.query_id);
                first_error.get_or_insert_with(|| (e.is_backend(), format!("query {}: {msg}", q.query_id)));
                (
                    String::new(),
                    AnswerLine {
                        query_id: q.query_id.clone(),
                        output: None,
                        error: Some(msg),
                    },
                )
            }
        };
        if out.is_none() {
            println!("{}", if text.is_empty() { "(no answer)" } else { &text });
        }
        predictions.push(PredictionLine {
            query_id: q.query_id.clone(),
            prediction_text: text,
            predicted_strokes: None,
        });
        answers.push(line);
    }

    if let Some(dir) = out {
        write_outputs(
            dir,
            &[
                ("predictions.jsonl", to_jsonl(&predictions)),
                ("answers.jsonl", to_jsonl(&answers)),
                ("trace.jsonl", traces),
            ],
        )?;
        println!("{} queries answered into {}", queries.len(), dir.display());
    }
    match first_error {
        Some(_) if backend_failures > 0 => Err(fail(
            FailureKind::Backend,
            anyhow!("{backend_failures} of {} queries failed on the backend", queries.len()),
        )),
        Some((_, msg)) if queries.len() == 1 => Err(fail(FailureKind::Data, anyhow!(msg))),
        _ => Ok(()),
    }
}

pub fn summarize(
    annotations: &Path,
    query: &str,
    match_id: Option<&str>,
    source_video: Option<String>,
    args: &EngineArgs,
    out: &Path,
) -> Result<(), Failure> {
    if query.trim().is_empty() {
        return Err(fail(FailureKind::Config, anyhow!("--query must not be empty")));
    }
    let mut prepared = prepare(annotations, args)?;
    prepared.config.source_video = source_video;
    let m = match (match_id, prepared.store.matches()) {
        (Some(id), _) => prepared
            .store
            .get(id)
            .ok_or_else(|| fail(FailureKind::Config, anyhow!("no match {id:?} in {}", annotations.display())))?,
        (None, [only]) => only,
        (None, all) => {
            return Err(fail(
                FailureKind::Config,
                anyhow!("{} matches loaded; pick one with --match-id", all.len()),
            ))
        }
    };
    let request = Query {
        query_id: "summary".into(),
        text: query.to_string(),
        category: QueryCategory::HighlightRequest,
        gold_answer: None,
        gold_strokes: None,
        rally_ref: None,
    };
    let backends = Backends::shared(prepared.backend.clone());
    let mut trace = Trace::new("summary");
    let result = run_summarization(&request, m, &backends, &prepared.config, &mut trace);
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let kind = if e.is_backend() { FailureKind::Backend } else { FailureKind::Data };
            return Err(fail(kind, anyhow!(e).context("summarization failed")));
        }
    };

    let mut files = vec![
        ("script.json", pretty(&outcome.script)),
        ("edl.json", pretty(&outcome.edl)),
        ("edl.csv", outcome.edl.to_csv()),
    ];
    if !outcome.edl.is_empty() {
        let cmd = render_command(&outcome.edl, "highlights.mp4").or_fail(FailureKind::Data)?;
        files.push(("command.json", pretty(&cmd)));
    }
    if !outcome.rejected.is_empty() || !outcome.failed_cells.is_empty() {
        files.push((
            "diagnostics.json",
            pretty(&serde_json::json!({
                "rejected": outcome.rejected,
                "failed_cells": outcome.failed_cells,
            })),
        ));
    }
    files.push(("trace.jsonl", trace.to_jsonl()));
    write_outputs(out, &files)?;

    println!("{}", outcome.script.title);
    for l in &outcome.script.lines {
        println!("  {}", l.narration);
    }
    println!(
        "{} segments, {:.3} s total, {} rejected, {} failed cells",
        outcome.edl.entries.len(),
        outcome.edl.total_duration_s(),
        outcome.rejected.len(),
        outcome.failed_cells.len()
    );
    Ok(())
}

pub fn eval(qa_file: &Path, predictions: &Path, out: Option<&Path>) -> Result<(), Failure> {
    open(qa_file)?;
    let pred_reader = open(predictions)?;
    let queries = load_queries(qa_file)?;
    let preds: Vec<PredictionLine> = read_jsonl(pred_reader)
        .with_context(|| format!("reading {}", predictions.display()))
        .or_fail(FailureKind::Data)?;
    let records = join_predictions(&queries, &preds).or_fail(FailureKind::Data)?;
    let report = aggregate(&records);
    let table = report.render_table();
    if let Some(dir) = out {
        write_outputs(dir, &[("report.json", pretty(&report)), ("table.txt", table.clone())])?;
    }
    print!("{table}");
    Ok(())
}

pub fn simulate(out: &Path, seed: u64, matches: usize, rallies: usize, max_strokes: usize) -> Result<(), Failure> {
    if matches == 0 || rallies == 0 || max_strokes == 0 {
        return Err(fail(
            FailureKind::Config,
            anyhow!("--matches, --rallies and --max-strokes must be at least 1"),
        ));
    }
    let cfg = SimConfig {
        rallies,
        min_strokes: 1,
        max_strokes,
    };
    let rows: Vec<_> = (0..matches)
        .flat_map(|i| simulate_annotations(&format!("m{:02}", i + 1), cfg, seed.wrapping_add(i as u64)))
        .collect();
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = out
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| fail(FailureKind::Config, anyhow!("--out must name a file")))?;
    config::write_outputs(dir, &[(name, encode_annotations(&rows))])?;
    println!("{} strokes written to {}", rows.len(), out.display());
    Ok(())
}
