mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Failure;

#[derive(Parser)]
#[command(name = "rallyscope", version, about = "Multi-agent rally QA and highlight summarization over stroke annotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Knobs shared by the commands that run agents.
#[derive(Args, Debug, Clone)]
pub struct EngineArgs {
    /// Routing rules JSON; the bundled rules are used when absent.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// oracle | scripted:<fixture.json> | remote:<url>
    #[arg(long, default_value = "oracle")]
    pub backend: String,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 64)]
    pub max_chunk_strokes: usize,
    #[arg(long, default_value_t = 1.0)]
    pub pad_before: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pad_after: f64,
    #[arg(long, default_value_t = 2)]
    pub max_rounds: usize,
    /// Skip Critic verification.
    #[arg(long)]
    pub no_critic: bool,
    /// Ask the Orchestrator to route queries no rule matches.
    #[arg(long)]
    pub route_fallback: bool,
    /// Knowledge QA JSONL whose gold answers the oracle may use.
    #[arg(long)]
    pub knowledge: Option<PathBuf>,
    /// Print wire requests to stderr and answer from the oracle instead of a remote endpoint.
    #[arg(long)]
    pub dry_run: bool,
    /// Per-call deadline for remote backends, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout_s: f64,
    /// Retries after a transient remote failure.
    #[arg(long, default_value_t = 1)]
    pub retries: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate annotations; write matches.jsonl.
    Ingest {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize QA items and captions.
    GenData {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Items per category per rally.
        #[arg(long, default_value_t = 1)]
        per_rally: usize,
        #[arg(long, default_value_t = 0.2)]
        negative_ratio: f64,
        /// Knowledge QA JSONL appended to the output.
        #[arg(long)]
        knowledge: Option<PathBuf>,
    },
    /// Answer one query or a QA file.
    Qa {
        #[arg(long)]
        annotations: PathBuf,
        /// QA JSONL to answer.
        #[arg(long, conflicts_with = "query", required_unless_present = "query")]
        qa: Option<PathBuf>,
        #[arg(long)]
        query: Option<String>,
        /// Rally for --query, as <match_id>/<rally_id>.
        #[arg(long)]
        rally: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a highlight script, EDL and encoder command.
    Summarize {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        match_id: Option<String>,
        #[arg(long)]
        source_video: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold QA.
    Eval {
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic annotation CSV.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        matches: usize,
        #[arg(long, default_value_t = 12)]
        rallies: usize,
        #[arg(long, default_value_t = 24)]
        max_strokes: usize,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { annotations, out } => commands::ingest(&annotations, &out),
        Command::GenData {
            annotations,
            out,
            seed,
            per_rally,
            negative_ratio,
            knowledge,
        } => commands::gen_data(&annotations, &out, seed, per_rally, negative_ratio, knowledge.as_deref()),
        Command::Qa {
            annotations,
            qa,
            query,
            rally,
            engine,
            out,
        } => commands::qa(&annotations, qa.as_deref(), query.as_deref(), rally.as_deref(), &engine, out.as_deref()),
        Command::Summarize {
            annotations,
            query,
            match_id,
            source_video,
            engine,
            out,
        } => commands::summarize(&annotations, &query, match_id.as_deref(), source_video, &engine, &out),
        Command::Eval { qa, predictions, out } => commands::eval(&qa, &predictions, out.as_deref()),
        Command::Simulate {
            out,
            seed,
            matches,
            rallies,
            max_strokes,
        } => commands::simulate(&out, seed, matches, rallies, max_strokes),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.kind.code())
        }
    }
}
