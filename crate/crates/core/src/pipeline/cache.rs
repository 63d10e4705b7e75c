//! Preprocessed-dataset cache shared by the `preprocess`, `train` and
//! `evaluate` steps.
//!
//! Text format, one record per line:
//!
//! ```text
//! flockact-frames 1
//! split <train|test>
//! animals <id_1> <id_2> ... <id_n>
//! segments <count>
//! segment <len>
//! <t>,<label>,<speed_1..n>,<dist_1..n>,<vx_1..n>,<vy_1..n>    (len rows)
//! segment <len>
//! ...
//! ```
//!
//! Labels use the label-CSV tokens; reals are written in shortest
//! round-trip form. Windows are cut from the frames on load, so one cache
//! serves every look-back length and feature set.

use std::path::Path;

use super::align::Split;
use super::features::{FeatureFrame, FrameSegment};
use super::labels::ActivityLabel;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CACHE_MAGIC: &str = "flockact-frames";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameCache {
    pub split: Split,
    pub animal_ids: Vec<String>,
    pub segments: Vec<FrameSegment>,
}

impl FrameCache {
    pub fn n_animals(&self) -> usize {
        self.animal_ids.len()
    }

    pub fn n_timesteps(&self) -> usize {
        self.segments.iter().map(FrameSegment::len).sum()
    }

    pub fn labels(&self) -> Vec<ActivityLabel> {
        self.segments.iter().flat_map(|s| s.labels.iter().copied()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{CACHE_MAGIC} {CACHE_VERSION}\n"));
        out.push_str(&format!(
            "split {}\n",
            match self.split {
                Split::Train => "train",
                Split::Test => "test",
            }
        ));
        out.push_str("animals");
        for id in &self.animal_ids {
            out.push(' ');
            out.push_str(id);
        }
        out.push('\n');
        out.push_str(&format!("segments {}\n", self.segments.len()));
        for seg in &self.segments {
            out.push_str(&format!("segment {}\n", seg.len()));
            for ((t, label), f) in seg.timestamps.iter().zip(&seg.labels).zip(&seg.frames) {
                out.push_str(&format!("{t},{label}"));
                let reals = f
                    .speeds
                    .iter()
                    .chain(&f.centroid_dists)
                    .chain(f.velocities.iter().map(|v| &v[0]))
                    .chain(f.velocities.iter().map(|v| &v[1]));
                for v in reals {
                    out.push(',');
                    out.push_str(&v.to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of cache file, expected {what}"),
            })
        };
        let err = |line: u64, msg: String| Error::Parse { line, msg };

        let (ln, header) = next("header")?;
        let version = header
            .strip_prefix(CACHE_MAGIC)
            .map(str::trim)
            .ok_or_else(|| err(ln, format!("not a {CACHE_MAGIC} file")))?;
        if version != CACHE_VERSION.to_string() {
            return Err(err(ln, format!("unsupported cache version `{version}`")));
        }

        let (ln, split_line) = next("split")?;
        let split = match split_line.strip_prefix("split ") {
            Some("train") => Split::Train,
            Some("test") => Split::Test,
            _ => return Err(err(ln, format!("bad split line `{split_line}`"))),
        };

        let (ln, animals) = next("animals")?;
        let animal_ids: Vec<String> = animals
            .strip_prefix("animals")
            .ok_or_else(|| err(ln, "expected `animals` line".into()))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let n = animal_ids.len();

        let (ln, segs) = next("segments")?;
        let n_segments: usize = segs
            .strip_prefix("segments ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, format!("bad segments line `{segs}`")))?;

        let mut segments = Vec::with_capacity(n_segments);
        for _ in 0..n_segments {
            let (ln, seg) = next("segment")?;
            let len: usize = seg
                .strip_prefix("segment ")
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| err(ln, format!("bad segment line `{seg}`")))?;
            let mut s = FrameSegment {
                timestamps: Vec::with_capacity(len),
                frames: Vec::with_capacity(len),
                labels: Vec::with_capacity(len),
            };
            for _ in 0..len {
                let (ln, row) = next("frame row")?;
                let fields: Vec<&str> = row.split(',').collect();
                if fields.len() != 2 + 4 * n {
                    return Err(err(ln, format!("expected {} fields, found {}", 2 + 4 * n, fields.len())));
                }
                let t: i64 = fields[0].parse().map_err(|_| err(ln, format!("bad timestamp `{}`", fields[0])))?;
                let label: ActivityLabel = fields[1].parse().map_err(|_| err(ln, format!("bad label `{}`", fields[1])))?;
                let reals = fields[2..]
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|_| err(ln, format!("bad number `{f}`"))))
                    .collect::<Result<Vec<f64>>>()?;
                s.timestamps.push(t);
                s.labels.push(label);
                s.frames.push(FeatureFrame {
                    speeds: reals[..n].to_vec(),
                    centroid_dists: reals[n..2 * n].to_vec(),
                    velocities: (0..n).map(|a| [reals[2 * n + a], reals[3 * n + a]]).collect(),
                });
            }
            segments.push(s);
        }
        Ok(FrameCache {
            split,
            animal_ids,
            segments,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        for id in &self.animal_ids {
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(Error::Validation(format!("animal id `{id}` cannot be cached (whitespace)")));
            }
        }
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
