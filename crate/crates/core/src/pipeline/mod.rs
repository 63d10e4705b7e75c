//! From raw trajectories to windowed, labelled feature datasets.

pub mod align;
pub mod cache;
pub mod features;
pub mod geo;
pub mod labels;
pub mod trajectory;
pub mod windows;

pub use align::{align_flock, align_positions, class_distribution, AlignedPositions, FlockDataset, Split};
pub use features::{build_segments, compute_features, FeatureFrame, FrameSegment};
pub use labels::{
    format_label_csv, load_label_csv, one_hot, parse_label_csv, validate_intervals, write_label_csv, ActivityLabel, LabelInterval, LabelTimeline, N_CLASSES,
};
pub use trajectory::{fill_gaps, format_trajectories, load_trajectories, parse_trajectories, write_trajectories, Sample, Trajectory};
pub use cache::FrameCache;
pub use windows::{make_windows, FeatureSet, FeatureSpec, FeatureWindow, OwnedWindow, VelocityEncoding, WindowSet};

use crate::error::Result;

/// Default cap on interpolated outages, in seconds.
pub const DEFAULT_MAX_GAP: i64 = 60;

/// Gap-fill, align, and featurize raw inputs.
pub fn preprocess(trajs: &[Trajectory], labels: &[LabelInterval], split: Split, max_gap: i64) -> Result<(FlockDataset, Vec<FrameSegment>)> {
    let filled: Vec<Trajectory> = trajs.iter().map(|t| fill_gaps(t, max_gap)).collect();
    let ds = align_flock(&filled, labels, split)?;
    let segments = build_segments(&ds)?;
    Ok((ds, segments))
}
