use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::labels::{ActivityLabel, LabelInterval, LabelTimeline};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Positions of every animal on a shared time axis, ordered by `animal_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPositions {
    pub animal_ids: Vec<String>,
    pub timestamps: Vec<i64>,
    /// `positions[t][a]` is animal `a` at `timestamps[t]`.
    pub positions: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockDataset {
    pub animal_ids: Vec<String>,
    pub timestamps: Vec<i64>,
    pub positions: Vec<Vec<[f64; 2]>>,
    pub labels: Vec<ActivityLabel>,
    pub split: Split,
}

impl FlockDataset {
    pub fn n_animals(&self) -> usize {
        self.animal_ids.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Index ranges of maximal runs of consecutive 1 s timestamps.
    pub fn contiguous_runs(&self) -> Vec<std::ops::Range<usize>> {
        contiguous_runs(&self.timestamps)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> FlockDataset {
        FlockDataset {
            animal_ids: self.animal_ids.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            positions: self.positions[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
            split: self.split,
        }
    }
}

pub fn contiguous_runs(timestamps: &[i64]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=timestamps.len() {
        if i == timestamps.len() || timestamps[i] != timestamps[i - 1] + 1 {
            if i > start {
                runs.push(start..i);
            }
            start = i;
        }
    }
    runs
}

/// Keep only timestamps at which every animal has a sample.
pub fn align_positions(trajs: &[Trajectory]) -> Result<AlignedPositions> {
    if trajs.is_empty() {
        return Err(Error::contract("align needs at least one trajectory"));
    }
    let mut order: Vec<&Trajectory> = trajs.iter().collect();
    order.sort_by(|a, b| a.animal_id.cmp(&b.animal_id));
    for w in order.windows(2) {
        if w[0].animal_id == w[1].animal_id {
            return Err(Error::Validation(format!("animal {} appears twice", w[0].animal_id)));
        }
    }

    let mut table: BTreeMap<i64, Vec<Option<[f64; 2]>>> = BTreeMap::new();
    let n = order.len();
    for (a, tr) in order.iter().enumerate() {
        for s in &tr.samples {
            table.entry(s.t).or_insert_with(|| vec![None; n])[a] = Some([s.x, s.y]);
        }
    }
    let mut timestamps = Vec::new();
    let mut positions = Vec::new();
    for (t, row) in table {
        if let Some(full) = row.into_iter().collect::<Option<Vec<_>>>() {
            timestamps.push(t);
            positions.push(full);
        }
    }
    Ok(AlignedPositions {
        animal_ids: order.iter().map(|t| t.animal_id.clone()).collect(),
        timestamps,
        positions,
    })
}

/// Aligned, labelled dataset: timestamps where every animal has a sample
/// and some label interval covers the timestamp.
pub fn align_flock(trajs: &[Trajectory], labels: &[LabelInterval], split: Split) -> Result<FlockDataset> {
    let timeline = LabelTimeline::new(labels)?;
    let aligned = align_positions(trajs)?;
    let mut ds = FlockDataset {
        animal_ids: aligned.animal_ids,
        timestamps: Vec::new(),
        positions: Vec::new(),
        labels: Vec::new(),
        split,
    };
    for (t, pos) in aligned.timestamps.into_iter().zip(aligned.positions) {
        if let Some(label) = timeline.label_at(t) {
            ds.timestamps.push(t);
            ds.positions.push(pos);
            ds.labels.push(label);
        }
    }
    if ds.is_empty() {
        return Err(Error::Validation(
            "no timestep has every animal present and a covering label".into(),
        ));
    }
    Ok(ds)
}

/// Per-class `(count, percent)` in [`ActivityLabel`] index order.
pub fn class_distribution(labels: &[ActivityLabel]) -> [(usize, f64); 3] {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let total = labels.len();
    counts.map(|c| {
        let pct = if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
        (c, pct)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::trajectory::Sample;

    fn traj(id: &str, ts: std::ops::RangeInclusive<i64>) -> Trajectory {
        let samples = ts
            .map(|t| Sample {
                t,
                x: t as f64,
                y: 0.0,
                imputed: false,
            })
            .collect();
        Trajectory::new(id, samples).unwrap()
    }

    fn label(a: i64, b: i64, act: ActivityLabel) -> LabelInterval {
        LabelInterval { t_start: a, t_end: b, activity: act }
    }

    #[test]
    fn overlap_of_coverage() {
        let trajs = vec![traj("a", 0..=20), traj("b", 10..=30)];
        let ds = align_flock(&trajs, &[label(0, 100, ActivityLabel::Active)], Split::Train).unwrap();
        assert_eq!(ds.len(), 11);
        assert_eq!(ds.timestamps.first(), Some(&10));
        assert!(ds.positions.iter().all(|p| p.len() == 2));
    }

    #[test]
    fn disjoint_coverage_fails() {
        let trajs = vec![traj("a", 0..=5), traj("b", 10..=15)];
        assert!(matches!(
            align_flock(&trajs, &[label(0, 100, ActivityLabel::Active)], Split::Train),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn label_gap_drops_timesteps() {
        let trajs = vec![traj("a", 0..=20), traj("b", 0..=20)];
        let labels = [label(0, 5, ActivityLabel::Active), label(8, 21, ActivityLabel::NotActive)];
        let ds = align_flock(&trajs, &labels, Split::Test).unwrap();
        assert_eq!(ds.len(), 21 - 3);
        assert!(!ds.timestamps.contains(&6));
        assert_eq!(ds.contiguous_runs(), vec![0..5, 5..18]);
    }

    #[test]
    fn animals_sorted_by_id() {
        let trajs = vec![traj("zulu", 0..=3), traj("alpha", 0..=3)];
        let ds = align_flock(&trajs, &[label(0, 4, ActivityLabel::Active)], Split::Train).unwrap();
        assert_eq!(ds.animal_ids, vec!["alpha", "zulu"]);
    }

    #[test]
    fn skewed_train_day_percentages() {
        let mut labels = vec![ActivityLabel::NotActive; 21801];
        labels.extend(vec![ActivityLabel::Active; 35811]);
        labels.extend(vec![ActivityLabel::HerdMovement; 452]);
        let d = class_distribution(&labels);
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert_eq!(d.map(|(c, _)| c), [21801, 35811, 452]);
        assert_eq!(d.map(|(_, p)| round2(p)), [37.55, 61.68, 0.78]);
    }

    #[test]
    fn skewed_test_day_percentages() {
        let mut labels = vec![ActivityLabel::NotActive; 26718];
        labels.extend(vec![ActivityLabel::Active; 36355]);
        labels.extend(vec![ActivityLabel::HerdMovement; 597]);
        let d = class_distribution(&labels);
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert_eq!(d.map(|(_, p)| round2(p)), [41.96, 57.10, 0.94]);
    }

    #[test]
    fn single_class_is_all() {
        let d = class_distribution(&[ActivityLabel::HerdMovement; 7]);
        assert_eq!(d[2], (7, 100.0));
        assert_eq!(d[0], (0, 0.0));
    }
}
