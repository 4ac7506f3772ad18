//! Checkable claims and their extraction from answer text.
//!
//! Three sentence forms are recognised: "stroke N is/was a X"
//! (stroke type), "N Xs" (count) and a stroke-type mention followed by a
//! bracketed report (occurrence set). Anything else yields no claim.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::report::{parse_grounder_text, render_report};
use crate::domain::{Player, Rally, StrokeType};
use crate::lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    HasStrokeType,
    CountEquals,
    OccursAt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum Claim {
    HasStrokeType {
        rally_id: String,
        stroke_index: u32,
        stroke_type: StrokeType,
        #[serde(default)]
        player: Option<Player>,
    },
    CountEquals {
        rally_id: String,
        stroke_type: StrokeType,
        player: Option<Player>,
        count: u64,
    },
    /// The given set is exactly where the stroke type occurs.
    OccursAt {
        rally_id: String,
        stroke_type: StrokeType,
        player: Option<Player>,
        strokes: BTreeSet<u32>,
    },
}

impl Claim {
    pub fn predicate(&self) -> Predicate {
        match self {
            Claim::HasStrokeType { .. } => Predicate::HasStrokeType,
            Claim::CountEquals { .. } => Predicate::CountEquals,
            Claim::OccursAt { .. } => Predicate::OccursAt,
        }
    }

    pub fn rally_id(&self) -> &str {
        match self {
            Claim::HasStrokeType { rally_id, .. }
            | Claim::CountEquals { rally_id, .. }
            | Claim::OccursAt { rally_id, .. } => rally_id,
        }
    }

    pub fn stroke_type(&self) -> StrokeType {
        match self {
            Claim::HasStrokeType { stroke_type, .. }
            | Claim::CountEquals { stroke_type, .. }
            | Claim::OccursAt { stroke_type, .. } => *stroke_type,
        }
    }
}

fn by_player(player: Option<Player>) -> String {
    player.map_or_else(String::new, |p| format!(" by the {} player", p.describe()))
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::HasStrokeType {
                rally_id,
                stroke_index,
                stroke_type,
                player,
            } => write!(
                f,
                "stroke {stroke_index} of rally {rally_id} is a {}{}",
                stroke_type.display_name(),
                by_player(*player)
            ),
            Claim::CountEquals {
                rally_id,
                stroke_type,
                player,
                count,
            } => {
                let noun = if *count == 1 {
                    stroke_type.display_name()
                } else {
                    stroke_type.plural_name()
                };
                write!(f, "rally {rally_id} contains {count} {noun}{}", by_player(*player))
            }
            Claim::OccursAt {
                rally_id,
                stroke_type,
                player,
                strokes,
            } => write!(
                f,
                "{}{} occur in rally {rally_id} at {}",
                stroke_type.plural_name(),
                by_player(*player),
                render_report(strokes.iter().copied())
            ),
        }
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

fn parse_player(word: Option<regex::Match<'_>>) -> Option<Player> {
    word.map(|m| if m.as_str() == "upper" { Player::Top } else { Player::Bottom })
}

impl FromStr for Claim {
    type Err = String;

    /// Parses the canonical rendering produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        static HAS: OnceLock<Regex> = OnceLock::new();
        static COUNT: OnceLock<Regex> = OnceLock::new();
        static OCCURS: OnceLock<Regex> = OnceLock::new();
        let s = s.trim().trim_end_matches('.');
        let unknown = |t: &str| format!("unknown stroke type {t:?}");

        if let Some(c) = re(&HAS, r"^stroke (\d+) of rally (\S+) is an? (.+?)(?: by the (upper|lower) player)?$").captures(s) {
            let stroke_type = lexicon::parse_stroke_term(&c[3]).ok_or_else(|| unknown(&c[3]))?;
            return Ok(Claim::HasStrokeType {
                rally_id: c[2].to_string(),
                stroke_index: c[1].parse().map_err(|e| format!("{e}"))?,
                stroke_type,
                player: parse_player(c.get(4)),
            });
        }
        if let Some(c) = re(
            &COUNT,
            r"^rally (\S+) contains (\d+) (.+?)(?: by the (upper|lower) player)?$",
        )
        .captures(s)
        {
            let stroke_type = lexicon::parse_stroke_term(&c[3]).ok_or_else(|| unknown(&c[3]))?;
            return Ok(Claim::CountEquals {
                rally_id: c[1].to_string(),
                stroke_type,
                player: parse_player(c.get(4)),
                count: c[2].parse().map_err(|e| format!("{e}"))?,
            });
        }
        if let Some(c) = re(
            &OCCURS,
            r"^(.+?)(?: by the (upper|lower) player)? occur in rally (\S+) at (\[.*\])$",
        )
        .captures(s)
        {
            let stroke_type = lexicon::parse_stroke_term(&c[1]).ok_or_else(|| unknown(&c[1]))?;
            return Ok(Claim::OccursAt {
                rally_id: c[3].to_string(),
                stroke_type,
                player: parse_player(c.get(2)),
                strokes: parse_grounder_text(&c[4]).map_err(|e| e.to_string())?,
            });
        }
        Err(format!("unrecognised claim: {s}"))
    }
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?' | b'\n')
            && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace())
        {
            out.push(&text[start..=i]);
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Pattern-extracts claims about `rally` from an answer.
pub fn extract_claims(answer_text: &str, rally: &Rally) -> Vec<Claim> {
    static HAS: OnceLock<Regex> = OnceLock::new();
    static COUNT: OnceLock<Regex> = OnceLock::new();
    static BRACKET: OnceLock<Regex> = OnceLock::new();
    let has_re = re(&HAS, r"(?i)\bstroke\s+(\d+)\s+(?:is|was)\s+(?:a|an)\s+");
    let count_re = COUNT.get_or_init(|| {
        Regex::new(&format!(r"(?i)\b({})\s+", lexicon::number_pattern())).expect("valid regex")
    });
    let bracket_re = re(&BRACKET, r"\[[^\[\]]*\]");

    let mut claims = Vec::new();
    for sentence in sentences(answer_text) {
        let mentions = lexicon::stroke_mentions(sentence);
        let mention_at = |pos: usize| mentions.iter().find(|m| m.start == pos);
        let player = lexicon::mentioned_player(sentence);
        let bracket = bracket_re.find(sentence);

        for c in has_re.captures_iter(sentence) {
            let whole = c.get(0).expect("match");
            if let (Some(m), Ok(index)) = (mention_at(whole.end()), c[1].parse::<u32>()) {
                claims.push(Claim::HasStrokeType {
                    rally_id: rally.rally_id.clone(),
                    stroke_index: index,
                    stroke_type: m.stroke_type,
                    player: None,
                });
            }
        }

        for c in count_re.captures_iter(sentence) {
            let whole = c.get(0).expect("match");
            let num = c.get(1).expect("group");
            if bracket.is_some_and(|b| b.start() <= num.start() && num.end() <= b.end()) {
                continue;
            }
            let before = sentence[..num.start()].trim_end().to_ascii_lowercase();
            if before.ends_with("stroke") || before.ends_with("rally") {
                continue;
            }
            let (Some(m), Some(count)) = (mention_at(whole.end()), lexicon::number_value(num.as_str())) else {
                continue;
            };
            claims.push(Claim::CountEquals {
                rally_id: rally.rally_id.clone(),
                stroke_type: m.stroke_type,
                player,
                count,
            });
        }

        if let Some(b) = bracket {
            let subject = mentions.iter().rev().find(|m| m.end <= b.start());
            if let (Some(m), Ok(strokes)) = (subject, parse_grounder_text(b.as_str())) {
                claims.push(Claim::OccursAt {
                    rally_id: rally.rally_id.clone(),
                    stroke_type: m.stroke_type,
                    player,
                    strokes,
                });
            }
        }
    }
    claims
}
