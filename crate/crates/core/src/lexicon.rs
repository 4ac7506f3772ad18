//! Text recognizers for stroke vocabulary, players and numbers.

use std::sync::OnceLock;

use regex::Regex;

use crate::domain::{Player, StrokeType};

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Surface forms, longest first so that alternation prefers "short serve" over nothing
/// and "drop shot" over "drop".
const STROKE_FORMS: &[(&str, StrokeType)] = &[
    ("miscellaneous shots?", StrokeType::Other),
    ("other shots?", StrokeType::Other),
    ("short serves?", StrokeType::ServeShort),
    ("serve[_ ]short", StrokeType::ServeShort),
    ("long serves?", StrokeType::ServeLong),
    ("serve[_ ]long", StrokeType::ServeLong),
    ("net[_ ]shots?", StrokeType::NetShot),
    ("drop shots?", StrokeType::Drop),
    ("smash(?:es)?", StrokeType::Smash),
    ("push(?:es)?", StrokeType::Push),
    ("clears?", StrokeType::Clear),
    ("drops?", StrokeType::Drop),
    ("drives?", StrokeType::Drive),
    ("lobs?", StrokeType::Lob),
    ("blocks?", StrokeType::Block),
];

fn stroke_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alts: Vec<String> = STROKE_FORMS.iter().map(|(p, _)| format!("({p})")).collect();
        Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).expect("valid stroke regex")
    })
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(r"(?i)\b(\d+|{})\b", NUMBER_WORDS.join("|"))).expect("valid number regex")
    })
}

/// A stroke-vocabulary mention inside a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrokeMention {
    pub start: usize,
    pub end: usize,
    pub stroke_type: StrokeType,
}

/// Every stroke-vocabulary mention, left to right, non-overlapping.
pub fn stroke_mentions(text: &str) -> Vec<StrokeMention> {
    stroke_regex()
        .captures_iter(text)
        .map(|caps| {
            let (idx, m) = caps
                .iter()
                .enumerate()
                .skip(1)
                .find_map(|(i, m)| m.map(|m| (i, m)))
                .expect("one alternative matched");
            StrokeMention {
                start: m.start(),
                end: m.end(),
                stroke_type: STROKE_FORMS[idx - 1].1,
            }
        })
        .collect()
}

pub fn first_stroke_type(text: &str) -> Option<StrokeType> {
    stroke_mentions(text).first().map(|m| m.stroke_type)
}

/// Parses a whole string as a single stroke term ("smash", "net_shot", "short serve").
pub fn parse_stroke_term(text: &str) -> Option<StrokeType> {
    let t = text.trim();
    let mentions = stroke_mentions(t);
    match mentions.as_slice() {
        [m] if m.start == 0 && m.end == t.len() => Some(m.stroke_type),
        _ => StrokeType::from_token(&t.to_ascii_lowercase()),
    }
}

/// Value of a digit string or number word (zero..twenty).
pub fn number_value(token: &str) -> Option<u64> {
    let lower = token.to_ascii_lowercase();
    if let Some(pos) = NUMBER_WORDS.iter().position(|w| *w == lower) {
        return Some(pos as u64);
    }
    lower.parse().ok()
}

/// First integer literal or number word, with its byte span.
pub fn first_number(text: &str) -> Option<(u64, usize, usize)> {
    number_regex()
        .find_iter(text)
        .find_map(|m| number_value(m.as_str()).map(|v| (v, m.start(), m.end())))
}

pub fn number_pattern() -> String {
    format!(r"(?:\d+|{})", NUMBER_WORDS.join("|"))
}

/// Player named in the text as "upper" or "lower", if exactly one side is named.
pub fn mentioned_player(text: &str) -> Option<Player> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)\b(upper|lower|top|bottom)\b").expect("valid regex"));
    let mut found = None;
    for m in re.find_iter(text) {
        let p = match m.as_str().to_ascii_lowercase().as_str() {
            "upper" | "top" => Player::Top,
            _ => Player::Bottom,
        };
        match found {
            None => found = Some(p),
            Some(q) if q == p => {}
            Some(_) => return None,
        }
    }
    found
}
