//! JSON documents exchanged with the labelling UI.
//!
//! Session (written by `export-session`, read by the UI):
//!
//! ```text
//! {
//!   "format": "flockact-session",
//!   "version": 1,
//!   "animal_ids": ["sheep01", ...],          sorted; fixes the order inside frames
//!   "timestamps": [t0, t1, ...],             integer seconds, strictly increasing
//!   "frames": [[[x, y], ...], ...],          frames[i][a] = animal a at timestamps[i]
//!   "arena": {"min_x": .., "min_y": .., "max_x": .., "max_y": ..},
//!   "labels": [{"t_start": .., "t_end": .., "activity": "herd"}, ...]
//! }
//! ```
//!
//! Labels (written by the UI, read by `ingest-labels`):
//!
//! ```text
//! {
//!   "format": "flockact-labels",
//!   "version": 1,
//!   "span": {"t_start": .., "t_end": ..},     optional; half-open session range
//!   "labels": [{"t_start": .., "t_end": .., "activity": ..}, ...]
//! }
//! ```
//!
//! Intervals are half-open `[t_start, t_end)`, non-overlapping, sorted by
//! `t_start`; `activity` is one of `not_active`, `active`, `herd`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pipeline::{align_positions, validate_intervals, LabelInterval, Trajectory};

pub const SESSION_FORMAT: &str = "flockact-session";
pub const LABELS_FORMAT: &str = "flockact-labels";
pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_FRAMES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub t_start: i64,
    pub t_end: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub format: String,
    pub version: u32,
    pub animal_ids: Vec<String>,
    pub timestamps: Vec<i64>,
    pub frames: Vec<Vec<[f64; 2]>>,
    pub arena: Arena,
    pub labels: Vec<LabelInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsDoc {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    pub labels: Vec<LabelInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub max_frames: usize,
    /// Keep timestamps `>= from`.
    pub from: Option<i64>,
    /// Keep timestamps `< to`.
    pub to: Option<i64>,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            max_frames: DEFAULT_MAX_FRAMES,
            from: None,
            to: None,
        }
    }
}

impl Session {
    pub fn span(&self) -> Option<Span> {
        Some(Span {
            t_start: *self.timestamps.first()?,
            t_end: self.timestamps.last()? + 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_header(&self.format, self.version, SESSION_FORMAT)?;
        if self.frames.len() != self.timestamps.len() {
            return Err(Error::Validation(format!(
                "session has {} frames for {} timestamps",
                self.frames.len(),
                self.timestamps.len()
            )));
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("session timestamps are not strictly increasing".into()));
        }
        let n = self.animal_ids.len();
        if let Some(i) = self.frames.iter().position(|f| f.len() != n) {
            return Err(Error::Validation(format!("frame {i} has {} positions, expected {n}", self.frames[i].len())));
        }
        validate_intervals(&self.labels)?;
        Ok(())
    }

    /// The labels document the UI writes for this session unchanged.
    pub fn labels_doc(&self) -> LabelsDoc {
        LabelsDoc {
            format: LABELS_FORMAT.into(),
            version: SCHEMA_VERSION,
            span: self.span(),
            labels: self.labels.clone(),
        }
    }
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(Error::Validation(format!("expected a `{expected}` document, found `{format}`")));
    }
    if version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "{expected} version {version} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

/// Build a session from trajectories (already gap-filled as desired). Only
/// timestamps where every animal has a sample become frames.
pub fn export_session(trajs: &[Trajectory], labels: &[LabelInterval], opts: &ExportOptions) -> Result<Session> {
    let aligned = align_positions(trajs)?;
    let keep = |t: i64| opts.from.is_none_or(|f| t >= f) && opts.to.is_none_or(|e| t < e);
    let mut timestamps = Vec::new();
    let mut frames = Vec::new();
    for (t, frame) in aligned.timestamps.iter().zip(aligned.positions) {
        if keep(*t) {
            timestamps.push(*t);
            frames.push(frame);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Validation("no aligned timesteps to export".into()));
    }
    if timestamps.len() > opts.max_frames {
        return Err(Error::Validation(format!(
            "session would hold {} frames, over the cap of {}; export shorter ranges with --from/--to",
            timestamps.len(),
            opts.max_frames
        )));
    }
    let mut arena = Arena {
        min_x: f64::INFINITY,
        min_y: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    for p in frames.iter().flatten() {
        arena.min_x = arena.min_x.min(p[0]);
        arena.min_y = arena.min_y.min(p[1]);
        arena.max_x = arena.max_x.max(p[0]);
        arena.max_y = arena.max_y.max(p[1]);
    }
    let labels = validate_intervals(labels)?;
    let session = Session {
        format: SESSION_FORMAT.into(),
        version: SCHEMA_VERSION,
        animal_ids: aligned.animal_ids,
        timestamps,
        frames,
        arena,
        labels,
    };
    session.validate()?;
    Ok(session)
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        msg: format!("{what}: {e}"),
    })
}

pub fn session_to_string(session: &Session) -> String {
    to_json(session)
}

pub fn parse_session(text: &str) -> Result<Session> {
    let s: Session = from_json(text, "session")?;
    s.validate()?;
    Ok(s)
}

pub fn write_session(path: &Path, session: &Session) -> Result<()> {
    write_atomic(path, session_to_string(session).as_bytes())
}

pub fn labels_to_string(doc: &LabelsDoc) -> String {
    to_json(doc)
}

/// Parse and check a labels document: known format and version, no
/// overlaps, and every interval inside `span` when one is given. Returns the
/// document with its labels sorted by `t_start`.
pub fn parse_labels_doc(text: &str) -> Result<LabelsDoc> {
    let doc: LabelsDoc = from_json(text, "labels")?;
    check_header(&doc.format, doc.version, LABELS_FORMAT)?;
    let labels = validate_intervals(&doc.labels)?;
    if let Some(span) = doc.span {
        if span.t_end <= span.t_start {
            return Err(Error::Validation(format!("empty span [{}, {})", span.t_start, span.t_end)));
        }
        let outside: Vec<String> = labels
            .iter()
            .filter(|l| l.t_start < span.t_start || l.t_end > span.t_end)
            .map(|l| format!("[{}, {}) {}", l.t_start, l.t_end, l.activity.as_str()))
            .collect();
        if !outside.is_empty() {
            return Err(Error::Validation(format!(
                "intervals outside the session span [{}, {}): {}",
                span.t_start,
                span.t_end,
                outside.join(", ")
            )));
        }
    }
    Ok(LabelsDoc { labels, ..doc })
}

pub fn load_labels_doc(path: &Path) -> Result<LabelsDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels_doc(&text)
}
