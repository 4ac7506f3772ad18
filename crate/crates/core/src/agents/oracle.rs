//! Deterministic backend answering every role straight from the annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use regex::Regex;

use super::claims::Claim;
use super::context::rally_refs;
use super::report::render_report;
use super::{
    AgentBackend, AgentError, AgentRequest, CriticResponse, GrounderResponse, OrchestratorBranch,
    OrchestratorResponse, OrchestratorTask, Role, RoleResponse,
};
use crate::domain::{Intent, Player, Rally, StrokeRef, StrokeType, Verdict};
use crate::ingest::{caption_rally, summarize_tactic, MatchStore};
use crate::lexicon;
use crate::router::{classify_intent, RoutingRules};

/// What a grounding sub-query asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventSpec {
    pub stroke_type: StrokeType,
    pub player: Option<Player>,
}

impl EventSpec {
    pub fn new(stroke_type: StrokeType) -> Self {
        Self {
            stroke_type,
            player: None,
        }
    }

    /// First stroke term in the text plus a player if exactly one side is named.
    pub fn parse(text: &str) -> Option<EventSpec> {
        Some(EventSpec {
            stroke_type: lexicon::first_stroke_type(text)?,
            player: lexicon::mentioned_player(text),
        })
    }

    pub fn matches(&self, stroke_type: StrokeType, player: Player) -> bool {
        stroke_type == self.stroke_type && self.player.is_none_or(|p| p == player)
    }

    /// Canonical grounding sub-query, e.g. "find all smashes by the upper player".
    pub fn sub_query(&self) -> String {
        match self.player {
            Some(p) => format!("find all {} by the {} player", self.stroke_type.plural_name(), p.describe()),
            None => format!("find all {}", self.stroke_type.plural_name()),
        }
    }
}

/// Indices of the strokes matching `spec`, ascending.
pub fn oracle_ground(rally: &Rally, spec: &EventSpec) -> BTreeSet<u32> {
    rally
        .strokes
        .iter()
        .filter(|s| spec.matches(s.stroke_type, s.player))
        .map(|s| s.stroke_index)
        .collect()
}

fn refs(rally: &Rally, indices: impl IntoIterator<Item = u32>) -> Vec<StrokeRef> {
    indices
        .into_iter()
        .map(|i| StrokeRef::new(rally.rally_id.clone(), i))
        .collect()
}

/// Adjudicates a claim against the rally's annotations.
pub fn oracle_critic(claim: &Claim, rally: &Rally) -> CriticResponse {
    let assertion = claim.to_string();
    let respond = |verdict: Verdict, evidence: Vec<StrokeRef>| CriticResponse {
        assertion: assertion.clone(),
        evidence_cited: evidence,
        verdict,
    };
    if claim.rally_id() != rally.rally_id {
        return respond(
            Verdict::Insufficient {
                note: format!("rally {} is not in the evidence", claim.rally_id()),
            },
            Vec::new(),
        );
    }
    let out_of_range = |i: u32| rally.stroke(i).is_none();
    let range_note = |i: u32| {
        format!(
            "stroke {i} does not exist; rally {} has {} strokes",
            rally.rally_id,
            rally.len()
        )
    };
    match claim {
        Claim::HasStrokeType {
            stroke_index,
            stroke_type,
            player,
            ..
        } => {
            let Some(s) = rally.stroke(*stroke_index) else {
                return respond(Verdict::Insufficient { note: range_note(*stroke_index) }, Vec::new());
            };
            let spec = EventSpec {
                stroke_type: *stroke_type,
                player: *player,
            };
            let evidence = refs(rally, [*stroke_index]);
            if spec.matches(s.stroke_type, s.player) {
                respond(Verdict::Supported, evidence)
            } else {
                let note = format!(
                    "stroke {stroke_index} of rally {} is a {} by the {} player",
                    rally.rally_id,
                    s.stroke_type.display_name(),
                    s.player.describe()
                );
                respond(Verdict::Refuted { note }, evidence)
            }
        }
        Claim::CountEquals {
            stroke_type,
            player,
            count,
            ..
        } => {
            let found = oracle_ground(
                rally,
                &EventSpec {
                    stroke_type: *stroke_type,
                    player: *player,
                },
            );
            let evidence = refs(rally, found.iter().copied());
            if found.len() as u64 == *count {
                respond(Verdict::Supported, evidence)
            } else {
                let actual = Claim::CountEquals {
                    rally_id: rally.rally_id.clone(),
                    stroke_type: *stroke_type,
                    player: *player,
                    count: found.len() as u64,
                };
                let note = format!("{actual}, at {}", render_report(found.iter().copied()));
                respond(Verdict::Refuted { note }, evidence)
            }
        }
        Claim::OccursAt {
            stroke_type,
            player,
            strokes,
            ..
        } => {
            if let Some(&i) = strokes.iter().find(|&&i| out_of_range(i)) {
                return respond(Verdict::Insufficient { note: range_note(i) }, Vec::new());
            }
            let found = oracle_ground(
                rally,
                &EventSpec {
                    stroke_type: *stroke_type,
                    player: *player,
                },
            );
            let evidence = refs(rally, found.iter().copied());
            if &found == strokes {
                respond(Verdict::Supported, evidence)
            } else {
                let actual = Claim::OccursAt {
                    rally_id: rally.rally_id.clone(),
                    stroke_type: *stroke_type,
                    player: *player,
                    strokes: found,
                };
                respond(Verdict::Refuted { note: actual.to_string() }, evidence)
            }
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

/// Correct answer to a rally question, phrased so the claim extractor can read it back.
pub fn answer_rally_question(question: &str, rally: &Rally) -> String {
    static COUNT: OnceLock<Regex> = OnceLock::new();
    static LOCATE: OnceLock<Regex> = OnceLock::new();
    static CLASSIFY: OnceLock<Regex> = OnceLock::new();
    static SUMMARY: OnceLock<Regex> = OnceLock::new();
    let spec = EventSpec::parse(question);

    if let Some(spec) = spec.filter(|_| re(&COUNT, r"(?i)\b(how many|count|number of)\b").is_match(question)) {
        let n = oracle_ground(rally, &spec).len();
        let noun = if n == 1 {
            spec.stroke_type.display_name()
        } else {
            spec.stroke_type.plural_name()
        };
        return match spec.player {
            Some(p) => format!("The {} player played {n} {noun} in this rally.", p.describe()),
            None => format!("{n} {noun} occurred in this rally."),
        };
    }
    if let Some(spec) = spec.filter(|_| {
        re(&LOCATE, r"(?i)\b(when|which strokes|at which|find all|find every|where)\b").is_match(question)
    }) {
        let found = oracle_ground(rally, &spec);
        let by = spec
            .player
            .map_or_else(String::new, |p| format!(" by the {} player", p.describe()));
        return format!(
            "{}{by} occur at {}.",
            capitalize(spec.stroke_type.plural_name()),
            render_report(found)
        );
    }
    if let Some(c) = re(&CLASSIFY, r"(?i)\bstroke\s+(\d+)\b").captures(question) {
        let index: u32 = c[1].parse().unwrap_or(0);
        return match rally.stroke(index) {
            Some(s) => format!("Stroke {index} is a {}.", s.stroke_type.display_name()),
            None => format!("There is no stroke {index}; this rally has {} strokes.", rally.len()),
        };
    }
    if re(&SUMMARY, r"(?i)\b(summar|describe|tactic)").is_match(question) {
        let player = lexicon::mentioned_player(question).unwrap_or(Player::Top);
        return summarize_tactic(rally, player);
    }
    format!(
        "This rally lasted {} strokes. {}",
        rally.len(),
        caption_rally(rally)
    )
}

/// Sub-queries for a summarization request: one per stroke term mentioned,
/// or a default highlight set when none is.
pub fn plan_sub_queries(request: &str) -> Vec<String> {
    let player = lexicon::mentioned_player(request);
    let mut seen = Vec::new();
    for m in lexicon::stroke_mentions(request) {
        if !seen.contains(&m.stroke_type) {
            seen.push(m.stroke_type);
        }
    }
    if seen.is_empty() {
        seen = vec![StrokeType::Smash, StrokeType::Drop, StrokeType::NetShot];
    }
    seen.into_iter()
        .map(|stroke_type| EventSpec { stroke_type, player }.sub_query())
        .collect()
}

/// One line of summary-script context: `k: <sub_query> | <match>/<rally> | [stroke ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptGroup {
    pub sub_query: String,
    pub match_id: String,
    pub rally_id: String,
    pub strokes: BTreeSet<u32>,
}

impl ScriptGroup {
    pub fn render(&self, k: usize) -> String {
        format!(
            "{k}: {} | {}/{} | {}",
            self.sub_query,
            self.match_id,
            self.rally_id,
            render_report(self.strokes.iter().copied())
        )
    }

    pub fn parse(line: &str) -> Option<(usize, ScriptGroup)> {
        static LINE: OnceLock<Regex> = OnceLock::new();
        let c = re(&LINE, r"^(\d+): (.+) \| ([^/\s]+)/(\S+) \| (\[.*\])$").captures(line.trim())?;
        Some((
            c[1].parse().ok()?,
            ScriptGroup {
                sub_query: c[2].to_string(),
                match_id: c[3].to_string(),
                rally_id: c[4].to_string(),
                strokes: super::report::parse_grounder_text(&c[5]).ok()?,
            },
        ))
    }
}

/// Default narration for a verified group.
pub fn narrate(group: &ScriptGroup, rally: Option<&Rally>) -> String {
    let parts: Vec<String> = group
        .strokes
        .iter()
        .map(|&i| match rally.and_then(|r| r.stroke(i)) {
            Some(s) => format!("stroke {i} from the {} player", s.player.describe()),
            None => format!("stroke {i}"),
        })
        .collect();
    let what = EventSpec::parse(&group.sub_query)
        .map_or("highlights", |s| s.stroke_type.plural_name());
    format!("Rally {}, {what}: {}.", group.rally_id, parts.join(", "))
}

pub fn script_title(request: &str) -> String {
    let names: Vec<&str> = plan_sub_queries(request)
        .iter()
        .filter_map(|q| EventSpec::parse(q))
        .map(|s| s.stroke_type.plural_name())
        .collect();
    format!("Highlights: {}", names.join(", "))
}

/// Oracle over a store of matches. Knowledge answers, if any, are looked up by
/// exact question text.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    store: Arc<MatchStore>,
    knowledge: BTreeMap<String, String>,
    rules: RoutingRules,
}

impl OracleBackend {
    pub fn new(store: Arc<MatchStore>) -> Self {
        Self {
            store,
            knowledge: BTreeMap::new(),
            rules: RoutingRules::default(),
        }
    }

    pub fn with_knowledge(mut self, knowledge: BTreeMap<String, String>) -> Self {
        self.knowledge = knowledge;
        self
    }

    pub fn store(&self) -> &MatchStore {
        &self.store
    }

    fn context_rallies(&self, request: &AgentRequest) -> Result<Vec<&Rally>, AgentError> {
        rally_refs(&request.context)
            .iter()
            .map(|r| {
                self.store
                    .rally(r)
                    .ok_or_else(|| AgentError::BackendUnavailable(format!("oracle has no rally {r}")))
            })
            .collect()
    }

    fn orchestrate(&self, request: &AgentRequest) -> Result<OrchestratorResponse, AgentError> {
        let query = request.field("Query").unwrap_or_default();
        let task = request
            .task()
            .ok_or_else(|| AgentError::schema(&request.instruction, "missing or unknown Task line"))?;
        let trace = format!("task {}", task.as_str());
        Ok(match task {
            OrchestratorTask::ClassifyIntent => match classify_intent(query, &self.rules).unwrap_or(Intent::TextKnowledgeQA) {
                Intent::TextKnowledgeQA => OrchestratorResponse::answer(OrchestratorBranch::TextAnswer, "", trace),
                Intent::VideoRallyQA => OrchestratorResponse::answer(OrchestratorBranch::VideoReasoning, "", trace),
                Intent::VideoSummarization => OrchestratorResponse::plan(Vec::new(), trace),
            },
            OrchestratorTask::TextQa => {
                let answer = self
                    .knowledge
                    .get(query)
                    .cloned()
                    .unwrap_or_else(|| "No answer is available for this question.".to_string());
                OrchestratorResponse::answer(OrchestratorBranch::TextAnswer, answer, trace)
            }
            OrchestratorTask::RallyQa => {
                let rallies = self.context_rallies(request)?;
                let rally = rallies
                    .first()
                    .ok_or_else(|| AgentError::schema(&request.context, "rally question without rally context"))?;
                OrchestratorResponse::answer(
                    OrchestratorBranch::VideoReasoning,
                    answer_rally_question(query, rally),
                    format!("{trace}; rally {}", rally.rally_id),
                )
            }
            OrchestratorTask::SummaryPlan => OrchestratorResponse::plan(plan_sub_queries(query), trace),
            OrchestratorTask::SummaryScript => {
                let mut lines = vec![format!("Title: {}", script_title(query))];
                for (k, group) in request.context.lines().filter_map(ScriptGroup::parse) {
                    let rally = self.store.rally(&crate::domain::RallyRef {
                        match_id: group.match_id.clone(),
                        rally_id: group.rally_id.clone(),
                    });
                    lines.push(format!("{k}: {}", narrate(&group, rally)));
                }
                OrchestratorResponse::answer(OrchestratorBranch::VideoReasoning, lines.join("\n"), trace)
            }
        })
    }

    fn ground(&self, request: &AgentRequest) -> Result<GrounderResponse, AgentError> {
        let rallies = self.context_rallies(request)?;
        let Some(spec) = request.field("Query").and_then(EventSpec::parse) else {
            return Ok(GrounderResponse::default());
        };
        let stroke_refs = rallies
            .iter()
            .flat_map(|r| refs(r, oracle_ground(r, &spec)))
            .collect();
        Ok(GrounderResponse { stroke_refs })
    }

    fn criticize(&self, request: &AgentRequest) -> Result<CriticResponse, AgentError> {
        let raw = request.field("Claim").unwrap_or_default();
        let claim: Claim = raw
            .parse()
            .map_err(|e: String| AgentError::schema(&request.instruction, e))?;
        let rallies = self.context_rallies(request)?;
        match rallies.iter().find(|r| r.rally_id == claim.rally_id()) {
            Some(rally) => Ok(oracle_critic(&claim, rally)),
            None => Ok(CriticResponse {
                assertion: claim.to_string(),
                evidence_cited: Vec::new(),
                verdict: Verdict::Insufficient {
                    note: format!("rally {} is not in the evidence", claim.rally_id()),
                },
            }),
        }
    }
}

impl AgentBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn call(&self, request: &AgentRequest) -> Result<RoleResponse, AgentError> {
        match request.role {
            Role::Orchestrator => self.orchestrate(request).map(RoleResponse::Orchestrator),
            Role::Grounder => self.ground(request).map(RoleResponse::Grounder),
            Role::Critic => self.criticize(request).map(RoleResponse::Critic),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::context::rally_block;
    use crate::agents::{extract_claims, invoke};
    use crate::domain::fixtures::rally;
    use crate::domain::MatchRecord;
    use StrokeType::*;

    /// Smashes at strokes 3 and 7.
    fn fixture() -> Rally {
        rally("r1", 0.0, &[ServeShort, Lob, Smash, Clear, Drop, NetShot, Smash, Lob, Clear, Drive])
    }

    fn backend(r: &Rally) -> OracleBackend {
        OracleBackend::new(Arc::new(MatchStore::new(vec![MatchRecord {
            match_id: r.match_id.clone(),
            rallies: vec![r.clone()],
            video_duration_s: 100.0,
        }])))
    }

    fn scan(r: &Rally, t: StrokeType, p: Option<Player>) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for (pos, s) in r.strokes.iter().enumerate() {
            if s.stroke_type == t && p.is_none_or(|p| p == s.player) {
                out.insert(pos as u32 + 1);
            }
        }
        out
    }

    #[test]
    fn ground_matches_rescan() {
        let r = fixture();
        assert_eq!(oracle_ground(&r, &EventSpec::new(Smash)), scan(&r, Smash, None));
        assert_eq!(oracle_ground(&r, &EventSpec::new(Smash)), [3, 7].into_iter().collect());
        assert!(oracle_ground(&r, &EventSpec::new(Block)).is_empty());
        let top = EventSpec {
            stroke_type: Smash,
            player: Some(Player::Top),
        };
        assert_eq!(oracle_ground(&r, &top), scan(&r, Smash, Some(Player::Top)));
        // Top serves, so odd strokes are Top's: smashes at 3 (Top) and 8 (Bottom).
        let mixed = rally("r2", 0.0, &[ServeLong, Clear, Smash, Lob, Clear, Drop, Lob, Smash]);
        assert_eq!(oracle_ground(&mixed, &top), [3].into_iter().collect());
    }

    #[test]
    fn grounder_request_against_oracle() {
        let r = fixture();
        let b = backend(&r);
        let req = AgentRequest::grounder("g1", "find all smashes", rally_block(&r));
        let RoleResponse::Grounder(g) = invoke(&b, &req).unwrap() else { panic!() };
        assert_eq!(g.stroke_refs, vec![StrokeRef::new("r1", 3), StrokeRef::new("r1", 7)]);
        let req = AgentRequest::grounder("g2", "find all blocks", rally_block(&r));
        let RoleResponse::Grounder(g) = invoke(&b, &req).unwrap() else { panic!() };
        assert!(g.stroke_refs.is_empty());
    }

    #[test]
    fn critic_verdicts() {
        let r = fixture();
        let has = |i, t| Claim::HasStrokeType {
            rally_id: "r1".into(),
            stroke_index: i,
            stroke_type: t,
            player: None,
        };
        assert_eq!(oracle_critic(&has(7, Smash), &r).verdict, Verdict::Supported);
        let wrong = oracle_critic(&has(7, Clear), &r);
        assert!(matches!(wrong.verdict, Verdict::Refuted { ref note } if note.contains("smash")));
        assert!(matches!(oracle_critic(&has(99, Smash), &r).verdict, Verdict::Insufficient { .. }));

        let count = |n| Claim::CountEquals {
            rally_id: "r1".into(),
            stroke_type: Smash,
            player: None,
            count: n,
        };
        let refuted = oracle_critic(&count(4), &r);
        assert_eq!(
            refuted.verdict,
            Verdict::Refuted {
                note: "rally r1 contains 2 smashes, at [stroke 3, stroke 7]".into()
            }
        );
        assert_eq!(refuted.evidence_cited.len(), 2);
        assert!(oracle_critic(&count(2), &r).verdict.is_supported());
    }

    /// Every claim over a tiny rally: Supported exactly when a direct check says so.
    #[test]
    fn critic_consistency_exhaustive() {
        let r = rally("r1", 0.0, &[ServeLong, Smash, Smash]);
        for t in StrokeType::ALL {
            for p in [None, Some(Player::Top), Some(Player::Bottom)] {
                for i in 1..=4 {
                    let claim = Claim::HasStrokeType {
                        rally_id: "r1".into(),
                        stroke_index: i,
                        stroke_type: t,
                        player: p,
                    };
                    let truth = r.strokes.get(i as usize - 1).is_some_and(|s| s.stroke_type == t && p.is_none_or(|p| p == s.player));
                    assert_eq!(oracle_critic(&claim, &r).verdict.is_supported(), truth, "{claim}");
                }
                for n in 0..4 {
                    let claim = Claim::CountEquals {
                        rally_id: "r1".into(),
                        stroke_type: t,
                        player: p,
                        count: n,
                    };
                    let truth = scan(&r, t, p).len() as u64 == n;
                    assert_eq!(oracle_critic(&claim, &r).verdict.is_supported(), truth, "{claim}");
                }
                for mask in 0u32..8 {
                    let strokes: BTreeSet<u32> = (1..=3).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                    let truth = scan(&r, t, p) == strokes;
                    let claim = Claim::OccursAt {
                        rally_id: "r1".into(),
                        stroke_type: t,
                        player: p,
                        strokes,
                    };
                    assert_eq!(oracle_critic(&claim, &r).verdict.is_supported(), truth, "{claim}");
                }
            }
        }
    }

    #[test]
    fn answers_round_trip_through_claims() {
        let r = fixture();
        for q in [
            "What shot is stroke 3?",
            "How many smashes occurred?",
            "How many lobs did the lower player play?",
            "When does a drop occur in this rally?",
            "When does a block occur in this rally?",
        ] {
            let answer = answer_rally_question(q, &r);
            let claims = extract_claims(&answer, &r);
            assert_eq!(claims.len(), 1, "{q} -> {answer}");
            assert!(oracle_critic(&claims[0], &r).verdict.is_supported(), "{answer}");
        }
        assert_eq!(answer_rally_question("What shot is stroke 3?", &r), "Stroke 3 is a smash.");
        assert_eq!(answer_rally_question("How many smashes occurred?", &r), "2 smashes occurred in this rally.");
        assert_eq!(
            answer_rally_question("When does a block occur in this rally?", &r),
            "Blocks occur at []."
        );
    }

    #[test]
    fn plan_defaults_and_terms() {
        assert_eq!(plan_sub_queries("highlight all smashes"), vec!["find all smashes"]);
        assert_eq!(
            plan_sub_queries("Create a highlight reel of the upper player's drops and smashes"),
            vec!["find all drops by the upper player", "find all smashes by the upper player"]
        );
        assert_eq!(plan_sub_queries("Create a highlight reel").len(), 3);
    }

    #[test]
    fn script_group_line_round_trip() {
        let g = ScriptGroup {
            sub_query: "find all smashes".into(),
            match_id: "m1".into(),
            rally_id: "r1".into(),
            strokes: [3, 7].into_iter().collect(),
        };
        assert_eq!(ScriptGroup::parse(&g.render(2)), Some((2, g)));
    }
}
