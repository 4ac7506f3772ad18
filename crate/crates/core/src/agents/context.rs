//! Context blocks handed to agents: one captioned block per rally, headed by
//! `[rally <match_id>/<rally_id>]`, optionally followed by critic feedback.

use std::sync::OnceLock;

use regex::Regex;

use crate::domain::{Rally, RallyRef};
use crate::ingest::caption_rally;

pub fn rally_block(rally: &Rally) -> String {
    format!(
        "[rally {}/{}]\n{}",
        rally.match_id,
        rally.rally_id,
        caption_rally(rally)
    )
}

pub fn rallies_context<'a>(rallies: impl IntoIterator<Item = &'a Rally>) -> String {
    rallies
        .into_iter()
        .map(rally_block)
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Rally headers in order of appearance.
pub fn rally_refs(context: &str) -> Vec<RallyRef> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?m)^\[rally ([^/\s\]]+)/([^\s\]]+)\]$").expect("valid regex"));
    re.captures_iter(context)
        .map(|c| RallyRef {
            match_id: c[1].to_string(),
            rally_id: c[2].to_string(),
        })
        .collect()
}

/// Appends a feedback section carrying the critic's evidence notes.
pub fn with_feedback(context: &str, round: usize, notes: &[String]) -> String {
    let mut out = format!("{context}\n\n[critic feedback round {round}]");
    for note in notes {
        out.push_str("\n- ");
        out.push_str(note);
    }
    out
}

pub fn feedback_rounds(context: &str) -> usize {
    context
        .lines()
        .filter(|l| l.starts_with("[critic feedback round "))
        .count()
}
