//! Sliding look-back windows: the model's input unit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{FeatureFrame, FrameSegment};
use super::labels::ActivityLabel;
use crate::error::{Error, Result};
use crate::numeric::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Velocities,
    Centroid,
    Both,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Velocities, FeatureSet::Centroid, FeatureSet::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Velocities => "velocities",
            FeatureSet::Centroid => "centroid",
            FeatureSet::Both => "both",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velocities" => Ok(FeatureSet::Velocities),
            "centroid" => Ok(FeatureSet::Centroid),
            "both" => Ok(FeatureSet::Both),
            other => Err(Error::Config(format!(
                "unknown feature set `{other}` (expected velocities, centroid or both)"
            ))),
        }
    }
}

/// How motion enters the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityEncoding {
    /// One scalar speed per animal.
    #[default]
    Speed,
    /// Signed `(vx, vy)` per animal.
    Components,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub set: FeatureSet,
    #[serde(default)]
    pub velocity: VelocityEncoding,
}

impl FeatureSpec {
    pub fn new(set: FeatureSet) -> Self {
        FeatureSpec {
            set,
            velocity: VelocityEncoding::Speed,
        }
    }

    pub fn dim(&self, n_animals: usize) -> usize {
        let motion = match self.velocity {
            VelocityEncoding::Speed => n_animals,
            VelocityEncoding::Components => 2 * n_animals,
        };
        match self.set {
            FeatureSet::Velocities => motion,
            FeatureSet::Centroid => n_animals,
            FeatureSet::Both => motion + n_animals,
        }
    }

    /// Append one frame's features in block order `[motion | centroid_dists]`.
    pub fn push_frame(&self, frame: &FeatureFrame, out: &mut Vec<f64>) {
        if self.set != FeatureSet::Centroid {
            match self.velocity {
                VelocityEncoding::Speed => out.extend_from_slice(&frame.speeds),
                VelocityEncoding::Components => {
                    out.extend(frame.velocities.iter().map(|v| v[0]));
                    out.extend(frame.velocities.iter().map(|v| v[1]));
                }
            }
        }
        if self.set != FeatureSet::Velocities {
            out.extend_from_slice(&frame.centroid_dists);
        }
    }
}

/// Borrowed `(len x dim)` row-major feature slab with its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureWindow<'a> {
    pub data: &'a [f64],
    pub dim: usize,
    pub target: ActivityLabel,
    pub t_end: i64,
}

impl<'a> FeatureWindow<'a> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_vectors(&self) -> Vec<Vector> {
        self.data.chunks_exact(self.dim).map(|r| Vector(r.to_vec())).collect()
    }
}

/// Owned counterpart of [`FeatureWindow`].
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedWindow {
    pub data: Vec<f64>,
    pub dim: usize,
    pub target: ActivityLabel,
    pub t_end: i64,
}

impl OwnedWindow {
    pub fn view(&self) -> FeatureWindow<'_> {
        FeatureWindow {
            data: &self.data,
            dim: self.dim,
            target: self.target,
            t_end: self.t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    features: Vec<f64>,
    labels: Vec<ActivityLabel>,
    timestamps: Vec<i64>,
}

/// Every stride-1 window of every segment, stored once per timestep and
/// handed out as borrowed views.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    dim: usize,
    lookback: usize,
    spec: FeatureSpec,
    blocks: Vec<Block>,
    /// `(block, index of the window's last frame)`.
    index: Vec<(usize, usize)>,
}

impl WindowSet {
    /// Windows from all segments; segments shorter than `m` contribute none.
    pub fn from_segments(segments: &[FrameSegment], m: usize, spec: FeatureSpec) -> Result<Self> {
        if m == 0 {
            return Err(Error::contract("look-back window must be positive"));
        }
        let n_animals = segments
            .first()
            .and_then(|s| s.frames.first())
            .map_or(0, |f| f.speeds.len());
        let dim = spec.dim(n_animals);
        let mut set = WindowSet {
            dim,
            lookback: m,
            spec,
            blocks: Vec::new(),
            index: Vec::new(),
        };
        for seg in segments {
            if seg.len() < m {
                continue;
            }
            let mut features = Vec::with_capacity(seg.len() * dim);
            for f in &seg.frames {
                if f.speeds.len() != n_animals {
                    return Err(Error::shape("make_windows", format!("{} animals", f.speeds.len()), n_animals));
                }
                spec.push_frame(f, &mut features);
            }
            let b = set.blocks.len();
            set.index.extend((m - 1..seg.len()).map(|end| (b, end)));
            set.blocks.push(Block {
                features,
                labels: seg.labels.clone(),
                timestamps: seg.timestamps.clone(),
            });
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn spec(&self) -> FeatureSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, i: usize) -> FeatureWindow<'_> {
        let (b, end) = self.index[i];
        let block = &self.blocks[b];
        let start = end + 1 - self.lookback;
        FeatureWindow {
            data: &block.features[start * self.dim..(end + 1) * self.dim],
            dim: self.dim,
            target: block.labels[end],
            t_end: block.timestamps[end],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = FeatureWindow<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn targets(&self) -> Vec<ActivityLabel> {
        self.iter().map(|w| w.target).collect()
    }

    /// Feature rows of each segment; the windows of a segment are its
    /// consecutive runs of `lookback` rows, in set order.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.blocks.iter().map(|b| b.features.as_slice())
    }

    /// Every feature row across all blocks (each timestep once).
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone + '_ {
        self.blocks.iter().flat_map(move |b| b.features.chunks_exact(self.dim))
    }
}

/// Windows of length `m` over a single segment; the target of each window is
/// the label at its final timestep.
pub fn make_windows(segment: &FrameSegment, m: usize, spec: FeatureSpec) -> Result<WindowSet> {
    if segment.len() < m {
        return Err(Error::contract(format!(
            "cannot cut windows of length {m} from {} frames",
            segment.len()
        )));
    }
    WindowSet::from_segments(std::slice::from_ref(segment), m, spec)
}
