//! Per-timestep flock features: each animal's speed and its distance to the
//! flock centroid.

use super::align::FlockDataset;
use super::labels::ActivityLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    /// m/s, one per animal.
    pub speeds: Vec<f64>,
    /// m, one per animal.
    pub centroid_dists: Vec<f64>,
    /// Signed velocity components (m/s), for the component encoding.
    pub velocities: Vec<[f64; 2]>,
}

/// Mean position of the flock, summed in animal order.
pub fn centroid(positions: &[[f64; 2]]) -> [f64; 2] {
    let n = positions.len() as f64;
    let (sx, sy) = positions.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

pub fn centroid_distances(positions: &[[f64; 2]]) -> Vec<f64> {
    let c = centroid(positions);
    positions.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).collect()
}

/// Backward-difference velocities between two consecutive snapshots.
pub fn velocities(prev: &[[f64; 2]], cur: &[[f64; 2]], dt: f64) -> Vec<[f64; 2]> {
    prev.iter()
        .zip(cur)
        .map(|(p, q)| [(q[0] - p[0]) / dt, (q[1] - p[1]) / dt])
        .collect()
}

pub fn speeds_of(vel: &[[f64; 2]]) -> Vec<f64> {
    vel.iter().map(|v| v[0].hypot(v[1])).collect()
}

/// Frame at `cur` given the previous snapshot `dt` seconds earlier.
pub fn frame_from_snapshots(prev: &[[f64; 2]], cur: &[[f64; 2]], dt: f64) -> FeatureFrame {
    let vel = velocities(prev, cur, dt);
    FeatureFrame {
        speeds: speeds_of(&vel),
        centroid_dists: centroid_distances(cur),
        velocities: vel,
    }
}

/// Features for every timestep of `ds`. The first timestep has no backward
/// difference and copies the second timestep's motion.
pub fn compute_features(ds: &FlockDataset) -> Result<Vec<FeatureFrame>> {
    features_for(&ds.timestamps, &ds.positions)
}

pub(crate) fn features_for(timestamps: &[i64], positions: &[Vec<[f64; 2]>]) -> Result<Vec<FeatureFrame>> {
    if timestamps.len() < 2 {
        return Err(Error::contract(format!(
            "feature extraction needs at least 2 timesteps, got {}",
            timestamps.len()
        )));
    }
    let mut frames = Vec::with_capacity(timestamps.len());
    for t in 1..timestamps.len() {
        let dt = (timestamps[t] - timestamps[t - 1]) as f64;
        frames.push(frame_from_snapshots(&positions[t - 1], &positions[t], dt));
    }
    let second = &frames[0];
    let first = FeatureFrame {
        speeds: second.speeds.clone(),
        centroid_dists: centroid_distances(&positions[0]),
        velocities: second.velocities.clone(),
    };
    frames.insert(0, first);
    Ok(frames)
}

/// A run of consecutive 1 s timesteps with its features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSegment {
    pub timestamps: Vec<i64>,
    pub frames: Vec<FeatureFrame>,
    pub labels: Vec<ActivityLabel>,
}

impl FrameSegment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Split `ds` at every timestamp discontinuity and featurize each run.
/// Runs shorter than two timesteps cannot be featurized and are dropped.
pub fn build_segments(ds: &FlockDataset) -> Result<Vec<FrameSegment>> {
    let mut out = Vec::new();
    for run in ds.contiguous_runs() {
        if run.len() < 2 {
            continue;
        }
        let frames = features_for(&ds.timestamps[run.clone()], &ds.positions[run.clone()])?;
        out.push(FrameSegment {
            timestamps: ds.timestamps[run.clone()].to_vec(),
            frames,
            labels: ds.labels[run].to_vec(),
        });
    }
    Ok(out)
}
