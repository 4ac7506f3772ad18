//! Grounder report text: `[stroke 3, stroke 7]`.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::AgentError;

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").expect("valid regex"))
}

fn stroke_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bstroke\s+(\d+)\b").expect("valid regex"))
}

fn no_evidence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(no (visual )?evidence|empty set|none found)\b").expect("valid regex")
    })
}

fn strict_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*\[\s*(stroke\s+\d+\s*(,\s*stroke\s+\d+\s*)*)?\]\s*$").expect("valid regex")
    })
}

/// Stroke indices in report order, first occurrence kept.
pub fn parse_grounder_text_ordered(text: &str) -> Result<Vec<u32>, AgentError> {
    let Some(caps) = bracket_re().captures(text) else {
        if no_evidence_re().is_match(text) {
            return Ok(Vec::new());
        }
        return Err(AgentError::UnparseableReport(text.to_string()));
    };
    let mut seen = BTreeSet::new();
    let mut ordered = Vec::new();
    for tok in stroke_token_re().captures_iter(&caps[1]) {
        // Indices beyond u32 cannot name a real stroke.
        let Ok(index) = tok[1].parse::<u32>() else {
            return Err(AgentError::UnparseableReport(text.to_string()));
        };
        if seen.insert(index) {
            ordered.push(index);
        }
    }
    Ok(ordered)
}

/// Deduplicated, ascending stroke indices from the first bracketed report.
pub fn parse_grounder_text(text: &str) -> Result<BTreeSet<u32>, AgentError> {
    parse_grounder_text_ordered(text).map(|v| v.into_iter().collect())
}

/// True when `text` is nothing but a bracketed report.
pub fn is_strict_report(text: &str) -> bool {
    strict_re().is_match(text)
}

/// Renders indices in the report form.
pub fn render_report<I: IntoIterator<Item = u32>>(indices: I) -> String {
    let parts: Vec<String> = indices.into_iter().map(|i| format!("stroke {i}")).collect();
    format!("[{}]", parts.join(", "))
}
