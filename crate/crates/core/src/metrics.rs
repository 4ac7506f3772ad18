//! Evaluation metrics: exact match on parsed core answers, stroke-level
//! precision/recall/F1, Hit@1, negative-query accuracy and ROUGE-L, plus the
//! per-category aggregation used for report tables.
//!
//! Every metric is generic over [`Scalar`]; aggregation runs on exact
//! rationals and rounds half-up to two decimals at the very end.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::report::parse_grounder_text_ordered;
use crate::domain::{Query, QueryCategory};
use crate::lexicon;
use crate::scalar::{percent_2dp, Scalar};
use crate::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no core answer found in prediction")]
    NoAnswerFound,
    #[error("no negative queries in cohort")]
    EmptyCohort,
    #[error("prediction for unknown query {0}")]
    UnknownQuery(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerKind {
    StrokeName,
    Count,
}

/// Pulls the core answer out of a generated sentence.
///
/// Stroke names normalize to the canonical token (`"short serve"` → `serve_short`);
/// counts normalize to decimal digits (`"three"` → `"3"`).
pub fn extract_core_answer(text: &str, kind: AnswerKind) -> Result<String, MetricsError> {
    match kind {
        AnswerKind::StrokeName => lexicon::first_stroke_type(text)
            .map(|t| t.token().to_string())
            .ok_or(MetricsError::NoAnswerFound),
        AnswerKind::Count => lexicon::first_number(text)
            .map(|(n, _, _)| n.to_string())
            .ok_or(MetricsError::NoAnswerFound),
    }
}

fn normalize_token(s: &str) -> String {
    let t = s.trim();
    if let Some(st) = lexicon::parse_stroke_term(t) {
        return st.token().to_string();
    }
    if let Some(n) = lexicon::number_value(t) {
        return n.to_string();
    }
    t.to_lowercase()
}

/// 1 when the normalized tokens are equal, else 0.
pub fn exact_match(pred_token: &str, gold_token: &str) -> u8 {
    u8::from(normalize_token(pred_token) == normalize_token(gold_token))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfScores<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Set precision/recall/F1 over stroke indices.
///
/// Both empty scores (1, 1, 1); exactly one empty scores (0, 0, 0).
pub fn stroke_prf<T: Scalar>(pred: &BTreeSet<u32>, gold: &BTreeSet<u32>) -> PrfScores<T> {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => {
            return PrfScores {
                precision: T::one(),
                recall: T::one(),
                f1: T::one(),
            }
        }
        (true, false) | (false, true) => {
            return PrfScores {
                precision: T::zero(),
                recall: T::zero(),
                f1: T::zero(),
            }
        }
        _ => {}
    }
    let hits = pred.intersection(gold).count();
    let precision = T::ratio(hits, pred.len());
    let recall = T::ratio(hits, gold.len());
    let sum = precision.clone() + recall.clone();
    let f1 = if sum.is_zero() {
        T::zero()
    } else {
        let two = T::one() + T::one();
        two * precision.clone() * recall.clone() / sum
    };
    PrfScores { precision, recall, f1 }
}

/// First reported stroke is in the gold set; an empty report on an empty gold set counts as a hit.
pub fn hit_at_1(pred_ordered: &[u32], gold: &BTreeSet<u32>) -> u8 {
    match pred_ordered.first() {
        Some(first) => u8::from(gold.contains(first)),
        None => u8::from(gold.is_empty()),
    }
}

/// Fraction of negative-query records answered with the empty set.
pub fn nqa<T: Scalar>(records: &[EvalRecord]) -> Result<T, MetricsError> {
    let negatives: Vec<&EvalRecord> = records.iter().filter(|r| r.query.is_negative()).collect();
    if negatives.is_empty() {
        return Err(MetricsError::EmptyCohort);
    }
    let correct = negatives
        .iter()
        .filter(|r| r.predicted_ordered().is_some_and(|p| p.is_empty()))
        .count();
    Ok(T::ratio(correct, negatives.len()))
}

/// Lowercased whitespace tokens with punctuation removed; empty tokens dropped.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Longest-common-subsequence length by dynamic programming, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure with β = 1, in [0, 1].
pub fn rouge_l<T: Scalar>(prediction: &str, reference: &str) -> T {
    let p = rouge_tokens(prediction);
    let r = rouge_tokens(reference);
    match (p.is_empty(), r.is_empty()) {
        (true, true) => return T::one(),
        (true, false) | (false, true) => return T::zero(),
        _ => {}
    }
    let lcs = lcs_len(&p, &r);
    if lcs == 0 {
        return T::zero();
    }
    let precision = T::ratio(lcs, p.len());
    let recall = T::ratio(lcs, r.len());
    let two = T::one() + T::one();
    two * precision.clone() * recall.clone() / (precision + recall)
}

/// One gold query joined with a model prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub query: Query,
    pub prediction_text: String,
    /// Ordered as reported; derived from `prediction_text` when absent.
    pub predicted_strokes: Option<Vec<u32>>,
}

impl EvalRecord {
    /// Reported strokes in order, deduplicated; `None` when nothing parseable was reported.
    pub fn predicted_ordered(&self) -> Option<Vec<u32>> {
        match &self.predicted_strokes {
            Some(v) => {
                let mut seen = BTreeSet::new();
                Some(v.iter().copied().filter(|i| seen.insert(*i)).collect())
            }
            None => parse_grounder_text_ordered(&self.prediction_text).ok(),
        }
    }
}

/// Wire form of one prediction line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub query_id: String,
    pub prediction_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_strokes: Option<Vec<u32>>,
}

/// Joins predictions to gold queries by `query_id`. Gold queries without a
/// prediction are scored against an empty answer.
pub fn join_predictions(
    queries: &[Query],
    predictions: &[PredictionLine],
) -> Result<Vec<EvalRecord>, MetricsError> {
    let known: HashMap<&str, &Query> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
    let mut by_id: HashMap<&str, &PredictionLine> = HashMap::new();
    for p in predictions {
        if !known.contains_key(p.query_id.as_str()) {
            return Err(MetricsError::UnknownQuery(p.query_id.clone()));
        }
        by_id.insert(p.query_id.as_str(), p);
    }
    Ok(queries
        .iter()
        .map(|q| match by_id.get(q.query_id.as_str()) {
            Some(p) => EvalRecord {
                query: q.clone(),
                prediction_text: p.prediction_text.clone(),
                predicted_strokes: p.predicted_strokes.clone(),
            },
            None => EvalRecord {
                query: q.clone(),
                prediction_text: String::new(),
                predicted_strokes: None,
            },
        })
        .collect())
}

/// Per-record localization outcome, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationScore {
    pub hit1: u8,
    pub set_em: u8,
    pub prf: PrfScores<Rational>,
}

pub fn score_localization(record: &EvalRecord) -> LocalizationScore {
    let gold = record.query.gold_strokes.clone().unwrap_or_default();
    match record.predicted_ordered() {
        Some(ordered) => {
            let pred: BTreeSet<u32> = ordered.iter().copied().collect();
            LocalizationScore {
                hit1: hit_at_1(&ordered, &gold),
                set_em: u8::from(pred == gold),
                prf: stroke_prf(&pred, &gold),
            }
        }
        // No report at all: every localization metric scores zero.
        None => LocalizationScore {
            hit1: 0,
            set_em: 0,
            prf: PrfScores {
                precision: Rational::ratio(0, 1),
                recall: Rational::ratio(0, 1),
                f1: Rational::ratio(0, 1),
            },
        },
    }
}

pub fn score_exact(record: &EvalRecord, kind: AnswerKind) -> u8 {
    let Some(gold) = record.query.gold_answer.as_deref() else {
        return 0;
    };
    match extract_core_answer(&record.prediction_text, kind) {
        Ok(pred) => exact_match(&pred, gold),
        Err(MetricsError::NoAnswerFound) | Err(_) => 0,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit1_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nqa_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_count: Option<usize>,
    /// Mean ROUGE-L F × 100.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub categories: BTreeMap<QueryCategory, CategoryReport>,
    pub notes: Vec<String>,
}

const HIT1_NOTE: &str = "hit@1: first reported stroke is in the gold set; an empty report on a negative query counts as a hit";
const LOC_EM_NOTE: &str = "localization EM: exact equality of predicted and gold stroke sets";

/// Aggregates records into per-category percentages.
///
/// Records are reduced in `query_id` order with exact arithmetic, so the
/// result does not depend on input order.
pub fn aggregate(records: &[EvalRecord]) -> MetricsReport {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.query.query_id.cmp(&b.query.query_id));

    let mut groups: BTreeMap<QueryCategory, Vec<&EvalRecord>> = BTreeMap::new();
    for r in sorted {
        groups.entry(r.query.category).or_default().push(r);
    }

    let mut report = MetricsReport::default();
    for (category, recs) in groups {
        let mut cat = CategoryReport {
            count: recs.len(),
            ..CategoryReport::default()
        };
        match category {
            QueryCategory::ActionClassification | QueryCategory::ActionCount => {
                let kind = if category == QueryCategory::ActionCount {
                    AnswerKind::Count
                } else {
                    AnswerKind::StrokeName
                };
                let em: Vec<Rational> = recs
                    .iter()
                    .map(|r| Rational::ratio(score_exact(r, kind).into(), 1))
                    .collect();
                cat.em_pct = Some(percent_2dp(&em));
            }
            QueryCategory::Summarisation | QueryCategory::KnowledgeQA => {
                let scores: Vec<Rational> = recs
                    .iter()
                    .map(|r| {
                        rouge_l::<Rational>(&r.prediction_text, r.query.gold_answer.as_deref().unwrap_or(""))
                    })
                    .collect();
                cat.rouge_l = Some(percent_2dp(&scores));
            }
            QueryCategory::TemporalLocalization | QueryCategory::HighlightRequest => {
                let scores: Vec<LocalizationScore> = recs.iter().map(|r| score_localization(r)).collect();
                let pick = |f: &dyn Fn(&LocalizationScore) -> Rational| -> f64 {
                    percent_2dp(&scores.iter().map(f).collect::<Vec<_>>())
                };
                cat.hit1_pct = Some(pick(&|s| Rational::ratio(s.hit1.into(), 1)));
                cat.em_pct = Some(pick(&|s| Rational::ratio(s.set_em.into(), 1)));
                cat.precision_pct = Some(pick(&|s| s.prf.precision.clone()));
                cat.recall_pct = Some(pick(&|s| s.prf.recall.clone()));
                cat.f1_pct = Some(pick(&|s| s.prf.f1.clone()));
                let owned: Vec<EvalRecord> = recs.iter().map(|r| (*r).clone()).collect();
                let negatives = owned.iter().filter(|r| r.query.is_negative()).count();
                cat.negative_count = Some(negatives);
                cat.nqa_pct = nqa::<Rational>(&owned)
                    .ok()
                    .map(|v| percent_2dp(std::slice::from_ref(&v)));
            }
        }
        report.categories.insert(category, cat);
    }
    if report
        .categories
        .keys()
        .any(|c| c.is_localization())
    {
        report.notes.push(HIT1_NOTE.to_string());
        report.notes.push(LOC_EM_NOTE.to_string());
    }
    report
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl MetricsReport {
    fn get(&self, c: QueryCategory) -> Option<&CategoryReport> {
        self.categories.get(&c)
    }

    /// Rally QA table followed by the localization detail table.
    pub fn render_table(&self) -> String {
        use QueryCategory::*;
        let loc = self.get(TemporalLocalization);
        let cols = [
            ("Action Class. (EM %)", self.get(ActionClassification).and_then(|c| c.em_pct)),
            ("Action Count (EM %)", self.get(ActionCount).and_then(|c| c.em_pct)),
            ("Summarisation (ROUGE-L)", self.get(Summarisation).and_then(|c| c.rouge_l)),
            ("Temporal Loc. (Hit@1 %)", loc.and_then(|c| c.hit1_pct)),
            ("Temporal Loc. (EM %)", loc.and_then(|c| c.em_pct)),
            ("Temporal Loc. (F1 %)", loc.and_then(|c| c.f1_pct)),
            ("Knowledge QA (ROUGE-L)", self.get(KnowledgeQA).and_then(|c| c.rouge_l)),
        ];
        let mut out = String::new();
        let header: Vec<&str> = cols.iter().map(|c| c.0).collect();
        let values: Vec<String> = cols
            .iter()
            .map(|(name, v)| format!("{:>width$}", cell(*v), width = name.len()))
            .collect();
        let _ = writeln!(out, "| {} |", header.join(" | "));
        let _ = writeln!(out, "| {} |", values.join(" | "));

        for (label, cat) in [
            ("Temporal Localization", TemporalLocalization),
            ("Highlight Request", HighlightRequest),
        ] {
            let Some(c) = self.get(cat) else { continue };
            let _ = writeln!(out);
            let _ = writeln!(out, "{label} (n = {})", c.count);
            for (name, v) in [
                ("hit@1", c.hit1_pct),
                ("EM", c.em_pct),
                ("Precision", c.precision_pct),
                ("Recall", c.recall_pct),
                ("F1-Score", c.f1_pct),
                ("NQA", c.nqa_pct),
            ] {
                let _ = writeln!(out, "  {name:<10} {:>7}", cell(v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn set(v: &[u32]) -> BTreeSet<u32> {
        v.iter().copied().collect()
    }

    fn loc_query(id: &str, gold: &[u32]) -> Query {
        Query {
            query_id: id.into(),
            text: "When does a smash occur?".into(),
            category: QueryCategory::TemporalLocalization,
            gold_answer: None,
            gold_strokes: Some(set(gold)),
            rally_ref: None,
        }
    }

    fn rec(q: Query, text: &str) -> EvalRecord {
        EvalRecord {
            query: q,
            prediction_text: text.into(),
            predicted_strokes: None,
        }
    }

    #[test]
    fn core_answer_extraction() {
        assert_eq!(
            extract_core_answer("The shot was a powerful smash.", AnswerKind::StrokeName).unwrap(),
            "smash"
        );
        assert_eq!(
            extract_core_answer("There are three smashes in this rally.", AnswerKind::Count).unwrap(),
            "3"
        );
        assert_eq!(
            extract_core_answer("I cannot tell.", AnswerKind::StrokeName),
            Err(MetricsError::NoAnswerFound)
        );
        assert_eq!(
            extract_core_answer("It is a short serve.", AnswerKind::StrokeName).unwrap(),
            "serve_short"
        );
    }

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match("smash", "smash"), 1);
        assert_eq!(exact_match("smash", "clear"), 0);
        assert_eq!(exact_match("3", "3"), 1);
        assert_eq!(exact_match("three", "3"), 1);
        assert_eq!(exact_match("net shot", "net_shot"), 1);
    }

    #[test]
    fn prf_hand_computed() {
        // |pred ∩ gold| = 2, |pred| = 2, |gold| = 3.
        let s: PrfScores<Rational> = stroke_prf(&set(&[3, 7]), &set(&[3, 5, 7]));
        assert_eq!(s.precision, Rational::ratio(1, 1));
        assert_eq!(s.recall, Rational::ratio(2, 3));
        assert_eq!(s.f1, Rational::ratio(4, 5));
        let f: PrfScores<f64> = stroke_prf(&set(&[3, 7]), &set(&[3, 5, 7]));
        assert!((f.recall - 0.6667).abs() < 1e-4 && (f.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn prf_conventions() {
        let one: PrfScores<f64> = stroke_prf(&set(&[1]), &set(&[1]));
        assert_eq!((one.precision, one.recall, one.f1), (1.0, 1.0, 1.0));
        let disjoint: PrfScores<f64> = stroke_prf(&set(&[2]), &set(&[3]));
        assert_eq!((disjoint.precision, disjoint.recall, disjoint.f1), (0.0, 0.0, 0.0));
        let both_empty: PrfScores<f32> = stroke_prf(&set(&[]), &set(&[]));
        assert_eq!(both_empty.f1, 1.0);
        let pred_empty: PrfScores<f64> = stroke_prf(&set(&[]), &set(&[4]));
        assert_eq!(pred_empty.precision, 0.0);
        let gold_empty: PrfScores<f64> = stroke_prf(&set(&[4]), &set(&[]));
        assert_eq!(gold_empty.recall, 0.0);
    }

    #[test]
    fn hit_at_1_cases() {
        assert_eq!(hit_at_1(&[3, 9], &set(&[3, 5])), 1);
        assert_eq!(hit_at_1(&[9], &set(&[3])), 0);
        assert_eq!(hit_at_1(&[], &set(&[])), 1);
        assert_eq!(hit_at_1(&[], &set(&[1])), 0);
    }

    #[test]
    fn nqa_cases() {
        let all_empty: Vec<EvalRecord> = (0..4).map(|i| rec(loc_query(&i.to_string(), &[]), "[]")).collect();
        assert_eq!(nqa::<f64>(&all_empty).unwrap(), 1.0);
        let mut one_wrong = all_empty.clone();
        one_wrong[2].prediction_text = "[stroke 4]".into();
        assert_eq!(nqa::<Rational>(&one_wrong).unwrap(), Rational::ratio(3, 4));
        let positives = vec![rec(loc_query("p", &[1]), "[stroke 1]")];
        assert_eq!(nqa::<f64>(&positives), Err(MetricsError::EmptyCohort));
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_l::<f64>("the cat sat", "the cat sat"), 1.0);
        assert_eq!(rouge_l::<Rational>("the cat sat", "the cat"), Rational::ratio(4, 5));
        assert_eq!(rouge_l::<f64>("alpha beta", "gamma delta"), 0.0);
        assert_eq!(rouge_l::<f64>("", ""), 1.0);
        assert_eq!(rouge_l::<f64>("", "x"), 0.0);
        assert_eq!(rouge_l::<f64>("The, Cat!", "the cat"), 1.0);
    }

    #[test]
    fn localization_set_em_two_of_three() {
        let recs = vec![
            rec(loc_query("a", &[1, 3]), "[stroke 1, stroke 3]"),
            rec(loc_query("b", &[2]), "[stroke 2]"),
            rec(loc_query("c", &[4, 6]), "[stroke 4]"),
        ];
        let report = aggregate(&recs);
        let loc = &report.categories[&QueryCategory::TemporalLocalization];
        assert_eq!(loc.em_pct, Some(66.67));
        assert_eq!(loc.hit1_pct, Some(100.0));
        // F1 mean = (1 + 1 + 2/3) / 3.
        assert_eq!(loc.f1_pct, Some(88.89));
        assert_eq!(loc.nqa_pct, None);
    }

    #[test]
    fn unparseable_prediction_scores_zero() {
        let r = rec(loc_query("a", &[]), "somewhere in the middle");
        let s = score_localization(&r);
        assert_eq!((s.hit1, s.set_em), (0, 0));
        assert_eq!(nqa::<f64>(&[r]).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_is_order_independent() {
        let mut recs = vec![
            rec(loc_query("a", &[1, 3]), "[stroke 3]"),
            rec(loc_query("b", &[2]), "[stroke 5, stroke 2]"),
            rec(loc_query("c", &[]), "[]"),
        ];
        let a = aggregate(&recs);
        recs.reverse();
        assert_eq!(a, aggregate(&recs));
        assert!(a.render_table().contains("NQA"));
    }

    #[test]
    fn join_rejects_unknown_ids() {
        let q = vec![loc_query("a", &[1])];
        let p = vec![PredictionLine {
            query_id: "zz".into(),
            prediction_text: "[]".into(),
            predicted_strokes: None,
        }];
        assert_eq!(join_predictions(&q, &p), Err(MetricsError::UnknownQuery("zz".into())));
        let joined = join_predictions(&q, &[]).unwrap();
        assert_eq!(joined[0].prediction_text, "");
    }
}
