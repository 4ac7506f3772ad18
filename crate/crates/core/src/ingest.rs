//! Annotation CSV parsing, match assembly, dense captions and seeded
//! question/answer synthesis with exact gold labels.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_match, MatchRecord, Player, Query, QueryCategory, Rally, RallyRef, StrokeAnnotation, StrokeRef,
    StrokeType,
};

/// Column order of the annotation CSV.
pub const CSV_HEADER: [&str; 7] = [
    "match_id",
    "rally_id",
    "stroke_index",
    "time_s",
    "player",
    "stroke_type",
    "court_zone",
];

/// Extent given to a rally's final stroke, which has no successor to end it.
pub const FINAL_STROKE_S: f64 = 2.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing or wrong header; expected {}", CSV_HEADER.join(","))]
    MissingHeader,
    #[error("invariant violations: {}", .0.join("; "))]
    InvariantViolation(Vec<String>),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Reads annotation rows in file order. Blank lines are skipped.
pub fn parse_annotations<R: Read>(input: R) -> Result<Vec<StrokeAnnotation>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(IngestError::MissingHeader),
    };
    if !header.iter().eq(CSV_HEADER.iter().copied()) {
        return Err(IngestError::MissingHeader);
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(parse_row(&rec, line)?);
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<StrokeAnnotation, IngestError> {
    let bad = |reason: &str| IngestError::MalformedRow {
        line,
        reason: reason.to_string(),
    };
    if rec.len() != CSV_HEADER.len() {
        return Err(bad(&format!("expected {} columns, found {}", CSV_HEADER.len(), rec.len())));
    }
    let field = |i: usize| rec.get(i).unwrap_or_default();
    if field(0).is_empty() || field(1).is_empty() {
        return Err(bad("match_id and rally_id must be non-empty"));
    }
    let stroke_index: u32 = field(2).parse().map_err(|_| bad("stroke_index must be an integer"))?;
    if stroke_index < 1 {
        return Err(bad("stroke_index must be ≥ 1"));
    }
    let time_s: f64 = field(3).parse().map_err(|_| bad("time_s must be a number"))?;
    if !(time_s.is_finite() && time_s >= 0.0) {
        return Err(bad("time_s must be a non-negative number"));
    }
    let player: Player = field(4).parse().map_err(|_| bad("unknown player"))?;
    let stroke_type = StrokeType::from_token(field(5)).ok_or_else(|| bad("unknown stroke_type"))?;
    let court_zone = field(6).parse().map_err(|_| bad("unknown court_zone"))?;
    Ok(StrokeAnnotation {
        match_id: field(0).to_string(),
        rally_id: field(1).to_string(),
        stroke_index,
        time_s,
        player,
        stroke_type,
        court_zone,
    })
}

/// Writes annotations in the CSV form `parse_annotations` reads.
pub fn encode_annotations(annotations: &[StrokeAnnotation]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for a in annotations {
        w.write_record([
            a.match_id.clone(),
            a.rally_id.clone(),
            a.stroke_index.to_string(),
            a.time_s.to_string(),
            a.player.to_string(),
            a.stroke_type.token().to_string(),
            a.court_zone.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Assembles one match. Duration defaults to the last stroke plus
/// [`FINAL_STROKE_S`].
pub fn build_match(annotations: Vec<StrokeAnnotation>) -> Result<MatchRecord, IngestError> {
    build_match_with_duration(annotations, None)
}

pub fn build_match_with_duration(
    annotations: Vec<StrokeAnnotation>,
    video_duration_s: Option<f64>,
) -> Result<MatchRecord, IngestError> {
    let Some(first) = annotations.first() else {
        return Err(IngestError::InvariantViolation(vec!["no annotations".into()]));
    };
    let match_id = first.match_id.clone();
    if let Some(other) = annotations.iter().find(|a| a.match_id != match_id) {
        return Err(IngestError::InvariantViolation(vec![format!(
            "annotations span matches {match_id} and {}",
            other.match_id
        )]));
    }
    let mut groups: BTreeMap<String, Vec<StrokeAnnotation>> = BTreeMap::new();
    for a in annotations {
        groups.entry(a.rally_id.clone()).or_default().push(a);
    }
    let mut rallies: Vec<Rally> = groups
        .into_iter()
        .map(|(rally_id, mut strokes)| {
            strokes.sort_by_key(|s| s.stroke_index);
            Rally {
                match_id: match_id.clone(),
                rally_id,
                strokes,
                winner: None,
            }
        })
        .collect();
    rallies.sort_by(|a, b| {
        let ta = a.start_s().unwrap_or(f64::INFINITY);
        let tb = b.start_s().unwrap_or(f64::INFINITY);
        ta.total_cmp(&tb).then_with(|| a.rally_id.cmp(&b.rally_id))
    });
    let last = rallies.iter().filter_map(Rally::end_s).fold(0.0, f64::max);
    let record = MatchRecord {
        match_id,
        rallies,
        video_duration_s: video_duration_s.unwrap_or(last + FINAL_STROKE_S),
    };
    let violations = validate_match(&record);
    if violations.is_empty() {
        Ok(record)
    } else {
        Err(IngestError::InvariantViolation(violations))
    }
}

/// Groups a multi-match annotation list by match id, in order of first appearance.
pub fn build_matches(annotations: Vec<StrokeAnnotation>) -> Result<Vec<MatchRecord>, IngestError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<StrokeAnnotation>> = BTreeMap::new();
    for a in annotations {
        if !groups.contains_key(&a.match_id) {
            order.push(a.match_id.clone());
        }
        groups.entry(a.match_id.clone()).or_default().push(a);
    }
    let mut violations = Vec::new();
    let mut out = Vec::new();
    for id in order {
        match build_match(groups.remove(&id).unwrap_or_default()) {
            Ok(m) => out.push(m),
            Err(IngestError::InvariantViolation(v)) => {
                violations.extend(v.into_iter().map(|x| format!("match {id}: {x}")))
            }
            Err(e) => return Err(e),
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(IngestError::InvariantViolation(violations))
    }
}

/// One sentence per stroke, in index order.
pub fn caption_rally(rally: &Rally) -> String {
    rally
        .strokes
        .iter()
        .map(|s| {
            format!(
                "Stroke {}: the {} player plays a {} from the {}.",
                s.stroke_index,
                s.player.describe(),
                s.stroke_type.display_name(),
                s.court_zone.describe()
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionLine {
    pub rally_id: String,
    pub caption: String,
}

fn most_common<T: Ord + Copy>(items: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for i in items {
        *counts.entry(i).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(k, _)| k)
}

/// Deterministic tactic summary for one player of a rally.
pub fn summarize_tactic(rally: &Rally, player: Player) -> String {
    let own: Vec<&StrokeAnnotation> = rally.strokes.iter().filter(|s| s.player == player).collect();
    let Some(last) = own.last() else {
        return format!("The {} player did not hit a shot in this rally.", player.describe());
    };
    let favourite = most_common(own.iter().map(|s| s.stroke_type)).expect("non-empty");
    let depth = most_common(own.iter().map(|s| s.court_zone.depth)).expect("non-empty");
    let shots = if own.len() == 1 { "shot" } else { "shots" };
    format!(
        "The {} player hit {} {shots} in this rally, favouring the {} and playing mostly from the {} court. \
         They finished with a {} from the {}.",
        player.describe(),
        own.len(),
        favourite.display_name(),
        depth.as_str(),
        last.stroke_type.display_name(),
        last.court_zone.describe()
    )
}

/// A question with exact gold labels and the step-by-step rationale behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticQa {
    #[serde(flatten)]
    pub query: Query,
    pub cot_rationale: String,
    pub source_rally: RallyRef,
}

/// Seeded template generator. `negative_ratio` is the share of localization
/// items that ask for a stroke type absent from the rally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QaSynthesizer {
    pub negative_ratio: f64,
}

impl Default for QaSynthesizer {
    fn default() -> Self {
        Self { negative_ratio: 0.2 }
    }
}

/// Stroke types used as question targets; `other` makes for unnatural questions.
const TARGET_TYPES: [StrokeType; 10] = [
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
];

fn category_code(c: QueryCategory) -> &'static str {
    match c {
        QueryCategory::ActionClassification => "cls",
        QueryCategory::ActionCount => "cnt",
        QueryCategory::TemporalLocalization => "loc",
        QueryCategory::Summarisation => "sum",
        QueryCategory::KnowledgeQA => "kqa",
        QueryCategory::HighlightRequest => "hl",
    }
}

fn inspect_lines(rally: &Rally, mut note: impl FnMut(&StrokeAnnotation) -> Option<String>) -> Vec<String> {
    rally
        .strokes
        .iter()
        .map(|s| {
            let base = format!(
                "Inspect stroke {}: the {} player plays a {}.",
                s.stroke_index,
                s.player.describe(),
                s.stroke_type.display_name()
            );
            match note(s) {
                Some(n) => format!("{base} {n}"),
                None => base,
            }
        })
        .collect()
}

impl QaSynthesizer {
    /// Builds one item of `category` for `rally`.
    ///
    /// # Panics
    /// When `category` is `KnowledgeQA` or `HighlightRequest`, which are not
    /// synthesized from a single rally, or when the rally is empty.
    pub fn synthesize(&self, rally: &Rally, category: QueryCategory, rng_seed: u64) -> SyntheticQa {
        assert!(!rally.is_empty(), "cannot synthesize questions for an empty rally");
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let query_id = format!(
            "{}-{}-{}-{rng_seed}",
            rally.match_id,
            rally.rally_id,
            category_code(category)
        );
        let (text, gold_answer, gold_strokes, rationale) = match category {
            QueryCategory::ActionClassification => {
                let index = rng.gen_range(1..=rally.len() as u32);
                let target = rally.stroke(index).expect("index in range");
                let templates = [
                    format!("What shot is stroke {index}?"),
                    format!("What type of shot is played at stroke {index}?"),
                    format!("Which stroke type is stroke {index} in this rally?"),
                ];
                let text = templates.choose(&mut rng).expect("non-empty").clone();
                let mut cot = inspect_lines(rally, |s| (s.stroke_index == index).then(|| "This is the stroke asked about.".into()));
                cot.push(format!("Answer: stroke {index} is a {}.", target.stroke_type.display_name()));
                (text, Some(target.stroke_type.token().to_string()), None, cot)
            }
            QueryCategory::ActionCount => {
                let target = *TARGET_TYPES.choose(&mut rng).expect("non-empty");
                let count = rally.strokes.iter().filter(|s| s.stroke_type == target).count();
                let plural = target.plural_name();
                let templates = [
                    format!("How many {plural} occurred?"),
                    format!("How many {plural} are played in this rally?"),
                    format!("Count the {plural} in this rally."),
                ];
                let text = templates.choose(&mut rng).expect("non-empty").clone();
                let mut running = 0;
                let mut cot = inspect_lines(rally, |s| {
                    (s.stroke_type == target).then(|| {
                        running += 1;
                        format!("Match number {running}.")
                    })
                });
                cot.push(format!("Answer: {count} in total."));
                (text, Some(count.to_string()), None, cot)
            }
            QueryCategory::TemporalLocalization => {
                let present: BTreeSet<StrokeType> = rally.strokes.iter().map(|s| s.stroke_type).collect();
                let absent: Vec<StrokeType> = TARGET_TYPES.into_iter().filter(|t| !present.contains(t)).collect();
                let present_targets: Vec<StrokeType> =
                    TARGET_TYPES.into_iter().filter(|t| present.contains(t)).collect();
                let want_negative = rng.gen_bool(self.negative_ratio.clamp(0.0, 1.0));
                let target = if (want_negative && !absent.is_empty()) || present_targets.is_empty() {
                    *absent.choose(&mut rng).expect("some target type is absent")
                } else {
                    *present_targets.choose(&mut rng).expect("non-empty")
                };
                let gold: BTreeSet<u32> = rally
                    .strokes
                    .iter()
                    .filter(|s| s.stroke_type == target)
                    .map(|s| s.stroke_index)
                    .collect();
                let name = target.display_name();
                let templates = [
                    format!("When does a {name} occur in this rally?"),
                    format!("At which strokes is a {name} played?"),
                    format!("When does the player play a {name}?"),
                ];
                let text = templates.choose(&mut rng).expect("non-empty").clone();
                let mut cot = inspect_lines(rally, |s| (s.stroke_type == target).then(|| "It matches.".into()));
                cot.push(format!(
                    "Answer: {}.",
                    crate::agents::render_report(gold.iter().copied())
                ));
                (text, None, Some(gold), cot)
            }
            QueryCategory::Summarisation => {
                let has_bottom = rally.strokes.iter().any(|s| s.player == Player::Bottom);
                let player = if has_bottom && rng.gen_bool(0.5) {
                    Player::Bottom
                } else {
                    Player::Top
                };
                let who = player.describe();
                let templates = [
                    format!("Summarize the {who} player's tactic in this rally."),
                    format!("Describe the {who} player's tactic in this rally."),
                ];
                let text = templates.choose(&mut rng).expect("non-empty").clone();
                let mut cot = inspect_lines(rally, |s| (s.player == player).then(|| "Counted for the summary.".into()));
                let summary = summarize_tactic(rally, player);
                cot.push(format!("Answer: {summary}"));
                (text, Some(summary), None, cot)
            }
            QueryCategory::KnowledgeQA | QueryCategory::HighlightRequest => {
                panic!("{category} items are not synthesized from a rally")
            }
        };
        SyntheticQa {
            query: Query {
                query_id,
                text,
                category,
                gold_answer,
                gold_strokes,
                rally_ref: Some(rally.rally_ref()),
            },
            cot_rationale: rationale.join(" "),
            source_rally: rally.rally_ref(),
        }
    }
}

/// [`QaSynthesizer::synthesize`] with the default negative ratio.
pub fn synthesize_qa(rally: &Rally, category: QueryCategory, rng_seed: u64) -> SyntheticQa {
    QaSynthesizer::default().synthesize(rally, category, rng_seed)
}

/// Categories synthesized per rally.
pub const VIDEO_CATEGORIES: [QueryCategory; 4] = [
    QueryCategory::ActionClassification,
    QueryCategory::ActionCount,
    QueryCategory::TemporalLocalization,
    QueryCategory::Summarisation,
];

/// Items for every rally of every match, `per_rally` per category, seeded from `seed`.
pub fn synthesize_dataset(
    matches: &[MatchRecord],
    synthesizer: &QaSynthesizer,
    per_rally: usize,
    seed: u64,
) -> Vec<SyntheticQa> {
    let mut out = Vec::new();
    let mut item_seed = seed.wrapping_mul(1_000_003);
    for m in matches {
        for rally in &m.rallies {
            for category in VIDEO_CATEGORIES {
                for _ in 0..per_rally {
                    out.push(synthesizer.synthesize(rally, category, item_seed));
                    item_seed = item_seed.wrapping_add(1);
                }
            }
        }
    }
    out
}

/// Matches indexed by id, for rally retrieval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchStore {
    matches: Vec<MatchRecord>,
}

impl MatchStore {
    pub fn new(matches: Vec<MatchRecord>) -> Self {
        Self { matches }
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn get(&self, match_id: &str) -> Option<&MatchRecord> {
        self.matches.iter().find(|m| m.match_id == match_id)
    }

    pub fn rally(&self, r: &RallyRef) -> Option<&Rally> {
        self.get(&r.match_id)?.rally(&r.rally_id)
    }

    pub fn stroke(&self, match_id: &str, r: &StrokeRef) -> Option<&StrokeAnnotation> {
        self.get(match_id)?.stroke(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::rally;
    use crate::domain::{CourtDepth, CourtSide, CourtZone};
    use StrokeType::*;

    const HEADER: &str = "match_id,rally_id,stroke_index,time_s,player,stroke_type,court_zone\n";

    #[test]
    fn parses_single_row() {
        let csv = format!("{HEADER}m1,r1,1,12.5,Top,serve_short,front-center\n\n\n");
        let rows = parse_annotations(csv.as_bytes()).unwrap();
        assert_eq!(
            rows,
            vec![StrokeAnnotation {
                match_id: "m1".into(),
                rally_id: "r1".into(),
                stroke_index: 1,
                time_s: 12.5,
                player: Player::Top,
                stroke_type: ServeShort,
                court_zone: CourtZone::new(CourtDepth::Front, CourtSide::Center),
            }]
        );
    }

    fn malformed(row: &str) -> (u64, String) {
        let csv = format!("{HEADER}{row}\n");
        match parse_annotations(csv.as_bytes()) {
            Err(IngestError::MalformedRow { line, reason }) => (line, reason),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn zero_index_rejected() {
        assert_eq!(
            malformed("m1,r1,0,12.5,Top,serve_short,front-center"),
            (2, "stroke_index must be ≥ 1".to_string())
        );
    }

    #[test]
    fn unknown_player_rejected() {
        assert_eq!(malformed("m1,r1,1,12.5,Upper,serve_short,front-center").1, "unknown player");
    }

    #[test]
    fn arity_and_enum_errors() {
        assert!(malformed("m1,r1,1,12.5,Top,serve_short").1.contains("columns"));
        assert_eq!(malformed("m1,r1,1,12.5,Top,tweener,front-center").1, "unknown stroke_type");
        assert_eq!(malformed("m1,r1,1,abc,Top,smash,front-center").1, "time_s must be a number");
    }

    #[test]
    fn header_required() {
        let csv = "m1,r1,1,12.5,Top,serve_short,front-center\n";
        assert!(matches!(parse_annotations(csv.as_bytes()), Err(IngestError::MissingHeader)));
        assert!(matches!(parse_annotations("".as_bytes()), Err(IngestError::MissingHeader)));
    }

    #[test]
    fn build_orders_rallies_by_first_stroke() {
        let mut ann = rally("b", 20.0, &[ServeShort, Clear]).strokes;
        ann.extend(rally("a", 1.0, &[ServeLong, Lob]).strokes);
        let m = build_match(ann).unwrap();
        let ids: Vec<&str> = m.rallies.iter().map(|r| r.rally_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(m.video_duration_s, 21.5 + FINAL_STROKE_S);
    }

    #[test]
    fn build_rejects_invalid_rally() {
        let mut ann = rally("a", 1.0, &[ServeLong, Lob]).strokes;
        ann[1].player = Player::Top;
        assert!(matches!(build_match(ann), Err(IngestError::InvariantViolation(_))));
    }

    #[test]
    fn caption_one_stroke() {
        let mut r = rally("r1", 0.0, &[ServeShort]);
        r.strokes[0].court_zone = CourtZone::new(CourtDepth::Front, CourtSide::Center);
        assert_eq!(
            caption_rally(&r),
            "Stroke 1: the upper player plays a short serve from the front center."
        );
    }

    #[test]
    fn caption_two_strokes_in_order() {
        let r = rally("r1", 0.0, &[ServeLong, Clear]);
        let c = caption_rally(&r);
        let first = c.find("Stroke 1:").unwrap();
        let second = c.find("Stroke 2: the lower player plays a clear").unwrap();
        assert!(first < second);
        assert_eq!(c, caption_rally(&r));
    }

    #[test]
    fn classification_item_reads_gold_from_rally() {
        let r = rally("r1", 0.0, &[ServeShort, Lob, Smash, Clear]);
        let item = (0..200)
            .map(|s| synthesize_qa(&r, QueryCategory::ActionClassification, s))
            .find(|q| q.query.text == "What shot is stroke 3?")
            .expect("template and index reachable");
        assert_eq!(item.query.gold_answer.as_deref(), Some("smash"));
        assert!(item.cot_rationale.contains("stroke 3"));
    }

    #[test]
    fn count_of_absent_type_is_zero() {
        let r = rally("r1", 0.0, &[ServeShort, Lob, Clear]);
        let item = (0..500)
            .map(|s| synthesize_qa(&r, QueryCategory::ActionCount, s))
            .find(|q| q.query.text.contains("smashes"))
            .unwrap();
        assert_eq!(item.query.gold_answer.as_deref(), Some("0"));
    }

    #[test]
    fn localization_of_drops() {
        let types = [ServeShort, Lob, Clear, Drop, Lob, Clear, Smash, Lob, Drop];
        let r = rally("r1", 0.0, &types);
        let item = (0..500)
            .map(|s| synthesize_qa(&r, QueryCategory::TemporalLocalization, s))
            .find(|q| q.query.text.contains(" drop "))
            .unwrap();
        // Brute-force scan of the fixture: positions (1-based) holding Drop.
        let expected: BTreeSet<u32> = types
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == Drop)
            .map(|(i, _)| i as u32 + 1)
            .collect();
        assert_eq!(expected, [4, 9].into_iter().collect());
        assert_eq!(item.query.gold_strokes, Some(expected));
    }

    #[test]
    fn negative_ratio_is_respected() {
        let r = rally("r1", 0.0, &[ServeShort, Lob, Clear]);
        let always = QaSynthesizer { negative_ratio: 1.0 };
        let never = QaSynthesizer { negative_ratio: 0.0 };
        for s in 0..50 {
            assert!(always.synthesize(&r, QueryCategory::TemporalLocalization, s).query.is_negative());
            assert!(!never.synthesize(&r, QueryCategory::TemporalLocalization, s).query.is_negative());
        }
    }

    #[test]
    fn summary_avoids_claim_patterns() {
        let r = rally("r1", 0.0, &[ServeShort, Lob, Clear, Smash]);
        let s = summarize_tactic(&r, Player::Top);
        assert_eq!(
            s,
            "The upper player hit 2 shots in this rally, favouring the short serve and playing mostly from the mid court. \
             They finished with a clear from the mid center."
        );
        assert!(crate::agents::extract_claims(&s, &r).is_empty());
    }

    #[test]
    fn summary_item_validates() {
        let r = rally("r1", 0.0, &[ServeShort, Lob]);
        let item = synthesize_qa(&r, QueryCategory::Summarisation, 3);
        assert!(item.query.validate().is_ok());
        assert!(item.query.gold_answer.is_some());
    }
}
