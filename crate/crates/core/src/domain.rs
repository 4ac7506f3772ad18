//! Shared vocabulary: strokes, rallies, matches, queries, intents, verdicts
//! and the time/grounding primitives every other module builds on.
//!
//! All types serialize to JSON with snake_case field names; the canonical
//! on-disk form is one value per line (JSONL).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Which side of the court a player occupies on the broadcast view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    Top,
    Bottom,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Top => Player::Bottom,
            Player::Bottom => Player::Top,
        }
    }

    /// Narrative form: `Top` is the "upper" player.
    pub fn describe(self) -> &'static str {
        match self {
            Player::Top => "upper",
            Player::Bottom => "lower",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Player::Top => "Top",
            Player::Bottom => "Bottom",
        }
    }
}

impl FromStr for Player {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Top" => Ok(Player::Top),
            "Bottom" => Ok(Player::Bottom),
            _ => Err("unknown player".to_string()),
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed stroke vocabulary; `Other` absorbs anything unlisted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeType {
    ServeShort,
    ServeLong,
    Clear,
    Drop,
    Smash,
    Drive,
    NetShot,
    Lob,
    Push,
    Block,
    Other,
}

impl StrokeType {
    pub const ALL: [StrokeType; 11] = [
        StrokeType::ServeShort,
        StrokeType::ServeLong,
        StrokeType::Clear,
        StrokeType::Drop,
        StrokeType::Smash,
        StrokeType::Drive,
        StrokeType::NetShot,
        StrokeType::Lob,
        StrokeType::Push,
        StrokeType::Block,
        StrokeType::Other,
    ];

    /// Canonical token, identical to the serialized form.
    pub fn token(self) -> &'static str {
        match self {
            StrokeType::ServeShort => "serve_short",
            StrokeType::ServeLong => "serve_long",
            StrokeType::Clear => "clear",
            StrokeType::Drop => "drop",
            StrokeType::Smash => "smash",
            StrokeType::Drive => "drive",
            StrokeType::NetShot => "net_shot",
            StrokeType::Lob => "lob",
            StrokeType::Push => "push",
            StrokeType::Block => "block",
            StrokeType::Other => "other",
        }
    }

    /// English noun phrase used in captions and answers.
    pub fn display_name(self) -> &'static str {
        match self {
            StrokeType::ServeShort => "short serve",
            StrokeType::ServeLong => "long serve",
            StrokeType::Clear => "clear",
            StrokeType::Drop => "drop",
            StrokeType::Smash => "smash",
            StrokeType::Drive => "drive",
            StrokeType::NetShot => "net shot",
            StrokeType::Lob => "lob",
            StrokeType::Push => "push",
            StrokeType::Block => "block",
            StrokeType::Other => "miscellaneous shot",
        }
    }

    pub fn plural_name(self) -> &'static str {
        match self {
            StrokeType::ServeShort => "short serves",
            StrokeType::ServeLong => "long serves",
            StrokeType::Clear => "clears",
            StrokeType::Drop => "drops",
            StrokeType::Smash => "smashes",
            StrokeType::Drive => "drives",
            StrokeType::NetShot => "net shots",
            StrokeType::Lob => "lobs",
            StrokeType::Push => "pushes",
            StrokeType::Block => "blocks",
            StrokeType::Other => "miscellaneous shots",
        }
    }

    pub fn is_serve(self) -> bool {
        matches!(self, StrokeType::ServeShort | StrokeType::ServeLong)
    }

    pub fn from_token(s: &str) -> Option<StrokeType> {
        StrokeType::ALL.into_iter().find(|t| t.token() == s)
    }
}

impl fmt::Display for StrokeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CourtDepth {
    Front,
    Mid,
    Rear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CourtSide {
    Left,
    Center,
    Right,
}

impl CourtDepth {
    pub const ALL: [CourtDepth; 3] = [CourtDepth::Front, CourtDepth::Mid, CourtDepth::Rear];

    pub fn as_str(self) -> &'static str {
        match self {
            CourtDepth::Front => "front",
            CourtDepth::Mid => "mid",
            CourtDepth::Rear => "rear",
        }
    }
}

impl CourtSide {
    pub const ALL: [CourtSide; 3] = [CourtSide::Left, CourtSide::Center, CourtSide::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            CourtSide::Left => "left",
            CourtSide::Center => "center",
            CourtSide::Right => "right",
        }
    }
}

/// Depth × side cell of the hitting player's half court.
///
/// Serialized as `"<depth>-<side>"`, e.g. `"front-center"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CourtZone {
    pub depth: CourtDepth,
    pub side: CourtSide,
}

impl CourtZone {
    pub fn new(depth: CourtDepth, side: CourtSide) -> Self {
        Self { depth, side }
    }

    /// "front center", as used in captions.
    pub fn describe(&self) -> String {
        format!("{} {}", self.depth.as_str(), self.side.as_str())
    }

    pub fn all() -> impl Iterator<Item = CourtZone> {
        CourtDepth::ALL
            .into_iter()
            .flat_map(|d| CourtSide::ALL.into_iter().map(move |s| CourtZone::new(d, s)))
    }
}

impl fmt::Display for CourtZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.depth.as_str(), self.side.as_str())
    }
}

impl FromStr for CourtZone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (depth, side) = s.split_once('-').ok_or_else(|| "unknown court_zone".to_string())?;
        let depth = CourtDepth::ALL
            .into_iter()
            .find(|d| d.as_str() == depth)
            .ok_or_else(|| "unknown court_zone".to_string())?;
        let side = CourtSide::ALL
            .into_iter()
            .find(|c| c.as_str() == side)
            .ok_or_else(|| "unknown court_zone".to_string())?;
        Ok(CourtZone { depth, side })
    }
}

impl Serialize for CourtZone {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CourtZone {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeAnnotation {
    pub match_id: String,
    pub rally_id: String,
    /// 1-based position within the rally.
    pub stroke_index: u32,
    /// Seconds from the start of the match video.
    pub time_s: f64,
    pub player: Player,
    pub stroke_type: StrokeType,
    pub court_zone: CourtZone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rally {
    pub match_id: String,
    pub rally_id: String,
    pub strokes: Vec<StrokeAnnotation>,
    #[serde(default)]
    pub winner: Option<Player>,
}

impl Rally {
    /// Looks up a stroke by its 1-based index.
    pub fn stroke(&self, index: u32) -> Option<&StrokeAnnotation> {
        let pos = usize::try_from(index).ok()?.checked_sub(1)?;
        self.strokes.get(pos).filter(|s| s.stroke_index == index)
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn start_s(&self) -> Option<f64> {
        self.strokes.first().map(|s| s.time_s)
    }

    pub fn end_s(&self) -> Option<f64> {
        self.strokes.last().map(|s| s.time_s)
    }

    pub fn rally_ref(&self) -> RallyRef {
        RallyRef {
            match_id: self.match_id.clone(),
            rally_id: self.rally_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub rallies: Vec<Rally>,
    pub video_duration_s: f64,
}

impl MatchRecord {
    pub fn rally(&self, rally_id: &str) -> Option<&Rally> {
        self.rallies.iter().find(|r| r.rally_id == rally_id)
    }

    pub fn rally_position(&self, rally_id: &str) -> Option<usize> {
        self.rallies.iter().position(|r| r.rally_id == rally_id)
    }

    pub fn stroke_count(&self) -> usize {
        self.rallies.iter().map(Rally::len).sum()
    }

    pub fn stroke(&self, r: &StrokeRef) -> Option<&StrokeAnnotation> {
        self.rally(&r.rally_id)?.stroke(r.stroke_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RallyRef {
    pub match_id: String,
    pub rally_id: String,
}

impl fmt::Display for RallyRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.match_id, self.rally_id)
    }
}

/// Globally addressed stroke: rally id plus the rally-local 1-based index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrokeRef {
    pub rally_id: String,
    pub stroke_index: u32,
}

impl StrokeRef {
    pub fn new(rally_id: impl Into<String>, stroke_index: u32) -> Self {
        Self {
            rally_id: rally_id.into(),
            stroke_index,
        }
    }
}

impl fmt::Display for StrokeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:stroke {}", self.rally_id, self.stroke_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryCategory {
    ActionClassification,
    ActionCount,
    TemporalLocalization,
    Summarisation,
    KnowledgeQA,
    HighlightRequest,
}

impl QueryCategory {
    pub const ALL: [QueryCategory; 6] = [
        QueryCategory::ActionClassification,
        QueryCategory::ActionCount,
        QueryCategory::TemporalLocalization,
        QueryCategory::Summarisation,
        QueryCategory::KnowledgeQA,
        QueryCategory::HighlightRequest,
    ];

    /// Categories answered with a stroke-index set.
    pub fn is_localization(self) -> bool {
        matches!(
            self,
            QueryCategory::TemporalLocalization | QueryCategory::HighlightRequest
        )
    }
}

impl fmt::Display for QueryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryCategory::ActionClassification => "ActionClassification",
            QueryCategory::ActionCount => "ActionCount",
            QueryCategory::TemporalLocalization => "TemporalLocalization",
            QueryCategory::Summarisation => "Summarisation",
            QueryCategory::KnowledgeQA => "KnowledgeQA",
            QueryCategory::HighlightRequest => "HighlightRequest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub category: QueryCategory,
    #[serde(default)]
    pub gold_answer: Option<String>,
    /// Present only for localization categories; `Some(∅)` marks a negative query.
    #[serde(default)]
    pub gold_strokes: Option<BTreeSet<u32>>,
    #[serde(default)]
    pub rally_ref: Option<RallyRef>,
}

impl Query {
    pub fn is_negative(&self) -> bool {
        self.gold_strokes.as_ref().is_some_and(BTreeSet::is_empty)
    }

    /// Checks that gold strokes are present exactly for localization categories.
    pub fn validate(&self) -> Result<(), String> {
        match (self.category.is_localization(), self.gold_strokes.is_some()) {
            (true, false) => Err(format!(
                "query {}: {} requires gold_strokes",
                self.query_id, self.category
            )),
            (false, true) => Err(format!(
                "query {}: {} must not carry gold_strokes",
                self.query_id, self.category
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intent {
    TextKnowledgeQA,
    VideoRallyQA,
    VideoSummarization,
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Intent::TextKnowledgeQA => "TextKnowledgeQA",
            Intent::VideoRallyQA => "VideoRallyQA",
            Intent::VideoSummarization => "VideoSummarization",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyStep {
    Route,
    Retrieve,
    OrchestratorReason,
    GroundBatch,
    CriticVerify,
    SynthesizeAnswer,
    ComposeScript,
    ComposeMedia,
}

impl fmt::Display for PolicyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A fixed collaboration plan. Fields are private so a plan cannot be
/// edited once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyPlan {
    intent: Intent,
    steps: Vec<PolicyStep>,
}

impl PolicyPlan {
    pub(crate) fn new(intent: Intent, steps: Vec<PolicyStep>) -> Self {
        Self { intent, steps }
    }

    pub fn intent(&self) -> Intent {
        self.intent
    }

    pub fn steps(&self) -> &[PolicyStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn contains(&self, step: PolicyStep) -> bool {
        self.steps.contains(&step)
    }
}

/// Critic judgement. Negative verdicts always carry the evidence behind them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    Refuted { note: String },
    Insufficient { note: String },
}

impl Verdict {
    pub fn is_supported(&self) -> bool {
        matches!(self, Verdict::Supported)
    }

    pub fn note(&self) -> Option<&str> {
        match self {
            Verdict::Supported => None,
            Verdict::Refuted { note } | Verdict::Insufficient { note } => Some(note),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Refuted { .. } => "refuted",
            Verdict::Insufficient { .. } => "insufficient",
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.note().is_none_or(|n| !n.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl TimeSegment {
    /// Returns `None` unless `0 ≤ start < end`.
    pub fn new(start_s: f64, end_s: f64, label: impl Into<String>) -> Option<Self> {
        (start_s >= 0.0 && start_s < end_s).then(|| Self {
            start_s,
            end_s,
            label: label.into(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub sub_query_id: String,
    pub chunk_id: String,
    pub stroke_refs: Vec<StrokeRef>,
}

/// Sorts refs by the rally's position in `match_record` then by stroke index,
/// and drops duplicates. Refs to unknown rallies sort last, by id.
pub fn normalize_refs(refs: &mut Vec<StrokeRef>, match_record: &MatchRecord) {
    let key = |r: &StrokeRef| {
        (
            match_record.rally_position(&r.rally_id).unwrap_or(usize::MAX),
            r.rally_id.clone(),
            r.stroke_index,
        )
    };
    refs.sort_by_key(key);
    refs.dedup();
}

/// Lists every violated rally invariant. An empty list means the rally is well formed.
pub fn validate_rally(rally: &Rally) -> Vec<String> {
    let mut violations = Vec::new();
    if rally.strokes.is_empty() {
        violations.push(format!("rally {} has no strokes", rally.rally_id));
        return violations;
    }
    if !rally.strokes[0].stroke_type.is_serve() {
        violations.push(format!(
            "stroke_type at stroke 1 must be a serve, found {}",
            rally.strokes[0].stroke_type
        ));
    }
    for (pos, stroke) in rally.strokes.iter().enumerate() {
        let expected = pos as u32 + 1;
        if stroke.stroke_index != expected {
            violations.push(format!(
                "stroke_index expected {expected} but found {} at position {}",
                stroke.stroke_index,
                pos + 1
            ));
        }
        if stroke.match_id != rally.match_id {
            violations.push(format!(
                "match_id mismatch at stroke {}: {} != {}",
                stroke.stroke_index, stroke.match_id, rally.match_id
            ));
        }
        if stroke.rally_id != rally.rally_id {
            violations.push(format!(
                "rally_id mismatch at stroke {}: {} != {}",
                stroke.stroke_index, stroke.rally_id, rally.rally_id
            ));
        }
        if !(stroke.time_s.is_finite() && stroke.time_s >= 0.0) {
            violations.push(format!(
                "time_s must be a non-negative number at stroke {}",
                stroke.stroke_index
            ));
        }
        if pos > 0 {
            let prev = &rally.strokes[pos - 1];
            if stroke.time_s.partial_cmp(&prev.time_s) != Some(std::cmp::Ordering::Greater) {
                violations.push(format!(
                    "time_s not increasing at stroke {} ({} after {})",
                    stroke.stroke_index, stroke.time_s, prev.time_s
                ));
            }
            if stroke.player == prev.player {
                violations.push(format!(
                    "player alternation violated at stroke {}",
                    stroke.stroke_index
                ));
            }
        }
    }
    violations
}

/// Rally-level checks for every rally plus the match-level ordering and
/// duration invariants.
pub fn validate_match(record: &MatchRecord) -> Vec<String> {
    let mut violations = Vec::new();
    for rally in &record.rallies {
        if rally.match_id != record.match_id {
            violations.push(format!(
                "rally {} belongs to match {}, expected {}",
                rally.rally_id, rally.match_id, record.match_id
            ));
        }
        violations.extend(
            validate_rally(rally)
                .into_iter()
                .map(|v| format!("rally {}: {v}", rally.rally_id)),
        );
    }
    let mut seen = BTreeSet::new();
    for rally in &record.rallies {
        if !seen.insert(rally.rally_id.as_str()) {
            violations.push(format!("duplicate rally_id {}", rally.rally_id));
        }
    }
    for pair in record.rallies.windows(2) {
        if let (Some(prev_end), Some(next_start)) = (pair[0].end_s(), pair[1].start_s()) {
            if prev_end >= next_start {
                violations.push(format!(
                    "rallies {} and {} overlap or are out of order",
                    pair[0].rally_id, pair[1].rally_id
                ));
            }
        }
    }
    if let Some(last) = record.rallies.last().and_then(Rally::end_s) {
        if last > record.video_duration_s {
            violations.push(format!(
                "last stroke at {last} exceeds video_duration_s {}",
                record.video_duration_s
            ));
        }
    }
    violations
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use StrokeType::*;

    #[test]
    fn well_formed_rally_has_no_violations() {
        let r = rally("r1", 1.0, &[ServeShort, Push, Lob]);
        assert!(validate_rally(&r).is_empty());
    }

    #[test]
    fn repeated_player_is_reported_at_later_stroke() {
        let mut r = rally("r1", 1.0, &[ServeShort, Push, Lob]);
        r.strokes[2].player = Player::Bottom;
        assert_eq!(
            validate_rally(&r),
            vec!["player alternation violated at stroke 3".to_string()]
        );
    }

    #[test]
    fn decreasing_time_names_stroke_two() {
        let mut r = rally("r1", 1.0, &[ServeShort, Push]);
        r.strokes[1].time_s = 0.9;
        let v = validate_rally(&r);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("time_s") && v[0].contains("stroke 2"), "{v:?}");
    }

    #[test]
    fn first_stroke_must_be_serve() {
        let r = rally("r1", 1.0, &[Clear, Push]);
        let v = validate_rally(&r);
        assert!(v[0].contains("stroke 1"), "{v:?}");
    }

    #[test]
    fn gap_in_indices_is_reported() {
        let mut r = rally("r1", 1.0, &[ServeShort, Push, Lob]);
        r.strokes[2].stroke_index = 4;
        let v = validate_rally(&r);
        assert!(v.iter().any(|m| m.contains("stroke_index")), "{v:?}");
    }

    #[test]
    fn empty_rally_is_invalid() {
        let r = Rally {
            match_id: "m1".into(),
            rally_id: "r1".into(),
            strokes: vec![],
            winner: None,
        };
        assert_eq!(validate_rally(&r).len(), 1);
    }

    #[test]
    fn court_zone_text_form() {
        let z: CourtZone = "front-center".parse().unwrap();
        assert_eq!(z, CourtZone::new(CourtDepth::Front, CourtSide::Center));
        assert_eq!(z.to_string(), "front-center");
        assert_eq!(z.describe(), "front center");
        assert!("middle-left".parse::<CourtZone>().is_err());
        assert_eq!(CourtZone::all().count(), 9);
    }

    #[test]
    fn stroke_lookup_is_one_based() {
        let r = rally("r1", 1.0, &[ServeShort, Push]);
        assert_eq!(r.stroke(1).unwrap().stroke_type, ServeShort);
        assert!(r.stroke(0).is_none());
        assert!(r.stroke(3).is_none());
    }

    #[test]
    fn query_gold_strokes_tied_to_category() {
        let mut q = Query {
            query_id: "q".into(),
            text: "When does a drop occur?".into(),
            category: QueryCategory::TemporalLocalization,
            gold_answer: None,
            gold_strokes: Some(BTreeSet::new()),
            rally_ref: None,
        };
        assert!(q.validate().is_ok());
        assert!(q.is_negative());
        q.category = QueryCategory::ActionCount;
        assert!(q.validate().is_err());
    }

    #[test]
    fn verdict_wire_form() {
        let v = Verdict::Refuted {
            note: "stroke 3 is a clear".into(),
        };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"kind":"refuted","note":"stroke 3 is a clear"}"#);
        assert!(!Verdict::Insufficient { note: " ".into() }.is_well_formed());
    }

    #[test]
    fn normalize_orders_by_rally_position() {
        let m = MatchRecord {
            match_id: "m1".into(),
            rallies: vec![rally("b", 1.0, &[ServeShort]), rally("a", 10.0, &[ServeShort])],
            video_duration_s: 20.0,
        };
        let mut refs = vec![StrokeRef::new("a", 1), StrokeRef::new("b", 1), StrokeRef::new("a", 1)];
        normalize_refs(&mut refs, &m);
        assert_eq!(refs, vec![StrokeRef::new("b", 1), StrokeRef::new("a", 1)]);
    }
}
