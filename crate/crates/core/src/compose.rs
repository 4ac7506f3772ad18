//! Time segments and edit decision lists from verified stroke references.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MatchRecord, StrokeRef, TimeSegment};
use crate::ingest::FINAL_STROKE_S;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("unknown stroke reference {0}")]
    UnknownStrokeRef(StrokeRef),
    #[error("pads must be finite and non-negative")]
    InvalidPads,
    #[error("edit decision list is empty")]
    EmptyEdl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pads {
    pub before_s: f64,
    pub after_s: f64,
}

impl Default for Pads {
    fn default() -> Self {
        Self {
            before_s: 1.0,
            after_s: 0.5,
        }
    }
}

impl Pads {
    pub fn validate(&self) -> Result<(), ComposeError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.before_s) && ok(self.after_s) {
            Ok(())
        } else {
            Err(ComposeError::InvalidPads)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub narration: String,
    pub stroke_refs: Vec<StrokeRef>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryScript {
    pub title: String,
    pub lines: Vec<ScriptLine>,
}

impl SummaryScript {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn stroke_refs(&self) -> impl Iterator<Item = &StrokeRef> {
        self.lines.iter().flat_map(|l| l.stroke_refs.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdlEntry {
    pub segment: TimeSegment,
    pub narration: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditDecisionList {
    pub source_video: String,
    pub entries: Vec<EdlEntry>,
}

impl EditDecisionList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.entries.iter().map(|e| e.segment.duration_s()).sum()
    }

    /// Rows of `index,start_s,end_s,label,narration`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "start_s", "end_s", "label", "narration"])
            .expect("in-memory write");
        for (i, e) in self.entries.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                format!("{:.3}", e.segment.start_s),
                format!("{:.3}", e.segment.end_s),
                e.segment.label.clone(),
                e.narration.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Raw padded interval of one stroke, clamped to the video.
fn stroke_interval(m: &MatchRecord, r: &StrokeRef, pads: Pads) -> Result<(f64, f64), ComposeError> {
    let unknown = || ComposeError::UnknownStrokeRef(r.clone());
    let rally = m.rally(&r.rally_id).ok_or_else(unknown)?;
    let stroke = rally.stroke(r.stroke_index).ok_or_else(unknown)?;
    let end = rally
        .stroke(r.stroke_index + 1)
        .map_or(stroke.time_s + FINAL_STROKE_S, |next| next.time_s);
    let clamp = |t: f64| t.clamp(0.0, m.video_duration_s);
    Ok((clamp(stroke.time_s - pads.before_s), clamp(end + pads.after_s)))
}

/// Padded, clamped segments with overlapping or touching ones merged, sorted by start.
pub fn segments_from_strokes(
    m: &MatchRecord,
    refs: &[StrokeRef],
    pads: Pads,
) -> Result<Vec<TimeSegment>, ComposeError> {
    pads.validate()?;
    let mut spans = refs
        .iter()
        .map(|r| stroke_interval(m, r, pads).map(|(s, e)| (s, e, r.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<(f64, f64, Vec<String>)> = Vec::new();
    for (s, e, label) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => {
                last.1 = last.1.max(e);
                if !last.2.contains(&label) {
                    last.2.push(label);
                }
            }
            _ => merged.push((s, e, vec![label])),
        }
    }
    Ok(merged
        .into_iter()
        .filter_map(|(s, e, labels)| TimeSegment::new(s, e, labels.join(", ")))
        .collect())
}

/// One entry per merged segment of each script line; segments of different
/// lines that overlap are fused and their narrations joined.
pub fn build_edl(
    m: &MatchRecord,
    script: &SummaryScript,
    pads: Pads,
    source_video: &str,
) -> Result<EditDecisionList, ComposeError> {
    let mut entries = Vec::new();
    for line in &script.lines {
        for segment in segments_from_strokes(m, &line.stroke_refs, pads)? {
            entries.push(EdlEntry {
                segment,
                narration: line.narration.clone(),
            });
        }
    }
    entries.sort_by(|a, b| {
        a.segment
            .start_s
            .total_cmp(&b.segment.start_s)
            .then(a.segment.end_s.total_cmp(&b.segment.end_s))
    });
    let mut fused: Vec<EdlEntry> = Vec::new();
    for e in entries {
        match fused.last_mut() {
            Some(last) if e.segment.start_s < last.segment.end_s => {
                last.segment.end_s = last.segment.end_s.max(e.segment.end_s);
                last.segment.label = format!("{}, {}", last.segment.label, e.segment.label);
                if !last.narration.split(" / ").any(|n| n == e.narration) {
                    last.narration = format!("{} / {}", last.narration, e.narration);
                }
            }
            _ => fused.push(e),
        }
    }
    Ok(EditDecisionList {
        source_video: source_video.to_string(),
        entries: fused,
    })
}

/// Structural problems with an EDL: ordering, overlap, bounds and total length.
pub fn edl_violations(edl: &EditDecisionList, video_duration_s: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (i, e) in edl.entries.iter().enumerate() {
        let s = &e.segment;
        if !(0.0 <= s.start_s && s.start_s < s.end_s && s.end_s <= video_duration_s) {
            out.push(format!("entry {i} [{}, {}] out of bounds", s.start_s, s.end_s));
        }
        if let Some(next) = edl.entries.get(i + 1) {
            if next.segment.start_s < s.start_s {
                out.push(format!("entry {} starts before entry {i}", i + 1));
            }
            if s.end_s > next.segment.start_s {
                out.push(format!("entry {i} overlaps entry {}", i + 1));
            }
        }
    }
    if edl.total_duration_s() > video_duration_s {
        out.push(format!(
            "total duration {} exceeds video duration {video_duration_s}",
            edl.total_duration_s()
        ));
    }
    out
}

/// ffmpeg invocation cutting each entry as its own input and concatenating them:
/// `ffmpeg -y (-ss S -to E -i SRC)… -filter_complex "[0:v][0:a]…concat=n=N:v=1:a=1[v][a]" -map [v] -map [a] OUT`.
pub fn render_command(edl: &EditDecisionList, output_path: &str) -> Result<Vec<String>, ComposeError> {
    if edl.is_empty() {
        return Err(ComposeError::EmptyEdl);
    }
    let mut tokens = vec!["ffmpeg".to_string(), "-y".to_string()];
    for e in &edl.entries {
        tokens.extend([
            "-ss".to_string(),
            format!("{:.3}", e.segment.start_s),
            "-to".to_string(),
            format!("{:.3}", e.segment.end_s),
            "-i".to_string(),
            edl.source_video.clone(),
        ]);
    }
    let n = edl.entries.len();
    let inputs: String = (0..n).map(|i| format!("[{i}:v][{i}:a]")).collect();
    tokens.extend([
        "-filter_complex".to_string(),
        format!("{inputs}concat=n={n}:v=1:a=1[v][a]"),
        "-map".to_string(),
        "[v]".to_string(),
        "-map".to_string(),
        "[a]".to_string(),
        output_path.to_string(),
    ]);
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::rally;
    use crate::domain::StrokeType::*;

    /// Strokes at 10.0, 11.5, 13.0, 14.5.
    fn m() -> MatchRecord {
        MatchRecord {
            match_id: "m1".into(),
            rallies: vec![rally("r1", 10.0, &[ServeShort, Lob, Smash, Clear]), rally("r0", 0.3, &[ServeLong])],
            video_duration_s: 20.0,
        }
    }

    fn seg(refs: &[(&str, u32)], pads: Pads) -> Vec<(f64, f64)> {
        let refs: Vec<StrokeRef> = refs.iter().map(|(r, i)| StrokeRef::new(*r, *i)).collect();
        segments_from_strokes(&m(), &refs, pads)
            .unwrap()
            .iter()
            .map(|s| (s.start_s, s.end_s))
            .collect()
    }

    #[test]
    fn single_stroke_hand_computed() {
        // [10.0 - 1.0, 11.5 + 0.5]
        assert_eq!(seg(&[("r1", 1)], Pads::default()), vec![(9.0, 12.0)]);
    }

    #[test]
    fn overlapping_strokes_merge() {
        assert_eq!(seg(&[("r1", 2), ("r1", 1)], Pads::default()), vec![(9.0, 13.5)]);
        let tight = Pads {
            before_s: 0.0,
            after_s: 0.0,
        };
        assert_eq!(seg(&[("r1", 1), ("r1", 3)], tight), vec![(10.0, 11.5), (13.0, 14.5)]);
        // Touching segments fuse.
        assert_eq!(seg(&[("r1", 1), ("r1", 2)], tight), vec![(10.0, 13.0)]);
    }

    #[test]
    fn clamped_at_zero_and_duration() {
        assert_eq!(seg(&[("r0", 1)], Pads::default()), vec![(0.0, 2.8)]);
        let wide = Pads {
            before_s: 0.0,
            after_s: 10.0,
        };
        assert_eq!(seg(&[("r1", 4)], wide), vec![(14.5, 20.0)]);
    }

    #[test]
    fn unknown_ref_and_bad_pads() {
        let bad = [StrokeRef::new("r1", 9)];
        assert_eq!(
            segments_from_strokes(&m(), &bad, Pads::default()),
            Err(ComposeError::UnknownStrokeRef(bad[0].clone()))
        );
        let neg = Pads {
            before_s: -1.0,
            after_s: 0.0,
        };
        assert_eq!(segments_from_strokes(&m(), &[], neg), Err(ComposeError::InvalidPads));
    }

    #[test]
    fn edl_fuses_lines_and_renders() {
        let script = SummaryScript {
            title: "t".into(),
            lines: vec![
                ScriptLine {
                    narration: "smashes".into(),
                    stroke_refs: vec![StrokeRef::new("r1", 3)],
                },
                ScriptLine {
                    narration: "clears".into(),
                    stroke_refs: vec![StrokeRef::new("r1", 4)],
                },
                ScriptLine {
                    narration: "serve".into(),
                    stroke_refs: vec![StrokeRef::new("r0", 1)],
                },
            ],
        };
        let edl = build_edl(&m(), &script, Pads::default(), "m1.mp4").unwrap();
        assert_eq!(edl.entries.len(), 2);
        assert_eq!(edl.entries[1].narration, "smashes / clears");
        assert!(edl_violations(&edl, 20.0).is_empty());
        let cmd = render_command(&edl, "out.mp4").unwrap();
        assert_eq!(cmd, render_command(&edl, "out.mp4").unwrap());
        assert_eq!(cmd.iter().filter(|t| *t == "-ss").count(), 2);
        assert!(cmd.contains(&"[0:v][0:a][1:v][1:a]concat=n=2:v=1:a=1[v][a]".to_string()));
        assert!(edl.to_csv().starts_with("index,start_s,end_s,label,narration\n1,0.000,2.800,"));
    }

    #[test]
    fn one_entry_command() {
        let edl = EditDecisionList {
            source_video: "v.mp4".into(),
            entries: vec![EdlEntry {
                segment: TimeSegment::new(9.0, 12.0, "r1:stroke 1").unwrap(),
                narration: String::new(),
            }],
        };
        let cmd = render_command(&edl, "o.mp4").unwrap();
        let pos = cmd.iter().position(|t| t == "-ss").unwrap();
        assert_eq!(cmd[pos..pos + 4], ["-ss", "9.000", "-to", "12.000"]);
        assert_eq!(cmd.iter().filter(|t| *t == "-ss").count(), 1);
        let empty = EditDecisionList {
            source_video: "v.mp4".into(),
            entries: vec![],
        };
        assert_eq!(render_command(&empty, "o.mp4"), Err(ComposeError::EmptyEdl));
    }
}
