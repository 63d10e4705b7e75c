//! Collective-activity labels and the interval label CSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// The three collective activities, in their fixed class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityLabel {
    #[serde(rename = "not_active")]
    NotActive = 0,
    #[serde(rename = "active")]
    Active = 1,
    #[serde(rename = "herd")]
    HerdMovement = 2,
}

pub const N_CLASSES: usize = 3;

impl ActivityLabel {
    pub const ALL: [ActivityLabel; N_CLASSES] = [
        ActivityLabel::NotActive,
        ActivityLabel::Active,
        ActivityLabel::HerdMovement,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::contract(format!("label index {i} out of range 0..{N_CLASSES}")))
    }

    /// File-format token.
    pub fn as_str(self) -> &'static str {
        match self {
            ActivityLabel::NotActive => "not_active",
            ActivityLabel::Active => "active",
            ActivityLabel::HerdMovement => "herd",
        }
    }

    /// Display name used in confusion-matrix reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ActivityLabel::NotActive => "Not Active",
            ActivityLabel::Active => "Active",
            ActivityLabel::HerdMovement => "Herd M.",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "not_active" => Ok(ActivityLabel::NotActive),
            "active" => Ok(ActivityLabel::Active),
            "herd" => Ok(ActivityLabel::HerdMovement),
            other => Err(Error::Validation(format!("unknown activity `{other}`"))),
        }
    }
}

/// One-hot encoding of a class index.
pub fn one_hot(label: usize, k: usize) -> Result<Vec<f64>> {
    if label >= k {
        return Err(Error::contract(format!("label index {label} >= k = {k}")));
    }
    let mut v = vec![0.0; k];
    v[label] = 1.0;
    Ok(v)
}

/// Half-open labelled interval `[t_start, t_end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub t_start: i64,
    pub t_end: i64,
    pub activity: ActivityLabel,
}

impl LabelInterval {
    pub fn contains(&self, t: i64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

/// Sort intervals by start and reject empty or overlapping ones, listing
/// every offending pair.
pub fn validate_intervals(intervals: &[LabelInterval]) -> Result<Vec<LabelInterval>> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by_key(|iv| (iv.t_start, iv.t_end));
    let mut problems = Vec::new();
    for iv in &sorted {
        if iv.t_end <= iv.t_start {
            problems.push(format!("empty interval [{}, {})", iv.t_start, iv.t_end));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].t_start < pair[0].t_end {
            problems.push(format!(
                "[{}, {}) {} overlaps [{}, {}) {}",
                pair[0].t_start, pair[0].t_end, pair[0].activity, pair[1].t_start, pair[1].t_end, pair[1].activity
            ));
        }
    }
    if problems.is_empty() {
        Ok(sorted)
    } else {
        Err(Error::Validation(format!("invalid label intervals: {}", problems.join("; "))))
    }
}

/// Label lookup over sorted, non-overlapping intervals.
#[derive(Debug, Clone)]
pub struct LabelTimeline {
    intervals: Vec<LabelInterval>,
}

impl LabelTimeline {
    pub fn new(intervals: &[LabelInterval]) -> Result<Self> {
        Ok(LabelTimeline {
            intervals: validate_intervals(intervals)?,
        })
    }

    pub fn intervals(&self) -> &[LabelInterval] {
        &self.intervals
    }

    pub fn label_at(&self, t: i64) -> Option<ActivityLabel> {
        let idx = self.intervals.partition_point(|iv| iv.t_end <= t);
        self.intervals
            .get(idx)
            .filter(|iv| iv.contains(t))
            .map(|iv| iv.activity)
    }
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    t_start: String,
    t_end: String,
    activity: String,
}

pub fn parse_label_csv(text: &str) -> Result<Vec<LabelInterval>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers != vec!["t_start", "t_end", "activity"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `t_start,t_end,activity`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.deserialize::<LabelRow>() {
        let row = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            msg: format!("invalid {what} `{v}`"),
        };
        let t_start: i64 = row.t_start.parse().map_err(|_| bad("t_start", &row.t_start))?;
        let t_end: i64 = row.t_end.parse().map_err(|_| bad("t_end", &row.t_end))?;
        let activity: ActivityLabel = row.activity.parse().map_err(|_| bad("activity", &row.activity))?;
        out.push(LabelInterval { t_start, t_end, activity });
    }
    Ok(out)
}

pub fn load_label_csv(path: &Path) -> Result<Vec<LabelInterval>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_csv(&text)
}

pub fn format_label_csv(intervals: &[LabelInterval]) -> String {
    let mut s = String::from("t_start,t_end,activity\n");
    for iv in intervals {
        s.push_str(&format!("{},{},{}\n", iv.t_start, iv.t_end, iv.activity));
    }
    s
}

pub fn write_label_csv(path: &Path, intervals: &[LabelInterval]) -> Result<()> {
    write_atomic(path, format_label_csv(intervals).as_bytes())
}
