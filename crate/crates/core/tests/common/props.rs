//! Pipeline properties as reusable checks over randomized inputs.

use flockact::pipeline::{
    build_segments, compute_features, fill_gaps, ActivityLabel, FeatureSet, FeatureSpec, FlockDataset, Sample, Split, Trajectory,
    WindowSet,
};
use flockact::rng::Rng;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

fn random_dataset(seg_lens: &[usize], n_animals: usize, seed: u64) -> FlockDataset {
    let mut rng = Rng::new(seed);
    let mut timestamps = Vec::new();
    let mut t = rng.below(1000) as i64;
    for &len in seg_lens {
        for _ in 0..len {
            timestamps.push(t);
            t += 1;
        }
        t += 2 + rng.below(100) as i64;
    }
    let positions = timestamps
        .iter()
        .map(|_| (0..n_animals).map(|_| [rng.uniform(-50.0, 50.0).unwrap(), rng.uniform(-50.0, 50.0).unwrap()]).collect())
        .collect();
    let labels = timestamps
        .iter()
        .map(|_| ActivityLabel::from_index(rng.below(3) as usize).unwrap())
        .collect();
    FlockDataset {
        animal_ids: (0..n_animals).map(|a| format!("a{a:02}")).collect(),
        timestamps,
        positions,
        labels,
        split: Split::Train,
    }
}

pub fn window_count_strategy() -> impl Strategy<Value = (Vec<usize>, usize, usize, u64)> {
    (prop::collection::vec(1usize..80, 1..5), 1usize..40, 1usize..5, any::<u64>())
}

/// Every contiguous run of `L` frames yields `max(0, L - m + 1)` windows.
pub fn check_window_count((seg_lens, m, n_animals, seed): (Vec<usize>, usize, usize, u64)) -> Result<(), TestCaseError> {
    let ds = random_dataset(&seg_lens, n_animals, seed);
    let segments = build_segments(&ds).map_err(|e| TestCaseError::fail(e.to_string()))?;
    // single-timestep runs cannot be featurized
    let featurizable: Vec<usize> = seg_lens.iter().copied().filter(|&l| l >= 2).collect();
    prop_assert_eq!(segments.len(), featurizable.len());
    let expected: usize = featurizable.iter().map(|&l| (l + 1).saturating_sub(m)).sum();
    for set in [FeatureSet::Velocities, FeatureSet::Both] {
        let windows = WindowSet::from_segments(&segments, m, FeatureSpec::new(set)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(windows.len(), expected);
        for w in windows.iter() {
            prop_assert_eq!(w.len(), m);
        }
    }
    Ok(())
}

pub fn trajectory_strategy() -> impl Strategy<Value = (Vec<(i64, f64, f64)>, i64)> {
    (
        prop::collection::vec((1i64..90, -1000.0f64..1000.0, -1000.0f64..1000.0), 1..40),
        1i64..70,
    )
}

fn build_trajectory(steps: &[(i64, f64, f64)]) -> Trajectory {
    let mut t = 0;
    let samples = steps
        .iter()
        .map(|&(dt, x, y)| {
            t += dt;
            Sample { t, x, y, imputed: false }
        })
        .collect();
    Trajectory::new("a01", samples).unwrap()
}

/// Imputed points sit on the segment between their flanking real samples,
/// and short gaps are filled tick by tick.
pub fn check_collinearity((steps, max_gap): (Vec<(i64, f64, f64)>, i64)) -> Result<(), TestCaseError> {
    let raw = build_trajectory(&steps);
    let filled = fill_gaps(&raw, max_gap);
    let real: Vec<&Sample> = filled.samples.iter().filter(|s| !s.imputed).collect();
    prop_assert_eq!(real.len(), raw.samples.len());
    let mut k = 0;
    for s in &filled.samples {
        if !s.imputed {
            k += 1;
            continue;
        }
        let (a, b) = (real[k - 1], real[k]);
        prop_assert!(a.t < s.t && s.t < b.t && b.t - a.t <= max_gap);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let (px, py) = (s.x - a.x, s.y - a.y);
        let scale = 1.0 + a.x.abs().max(a.y.abs()).max(b.x.abs()).max(b.y.abs());
        let cross = dx * py - dy * px;
        prop_assert!(cross.abs() <= 1e-9 * scale * scale, "off the segment: cross {}", cross);
        if len2 > 0.0 {
            let u = (dx * px + dy * py) / len2;
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&u), "outside the segment: u {}", u);
        }
    }
    for w in filled.samples.windows(2) {
        let span = w[1].t - w[0].t;
        prop_assert!(span == 1 || (span > max_gap && filled.gaps.contains(&(w[0].t, w[1].t))));
    }
    Ok(())
}

pub fn check_idempotent((steps, max_gap): (Vec<(i64, f64, f64)>, i64)) -> Result<(), TestCaseError> {
    let once = fill_gaps(&build_trajectory(&steps), max_gap);
    let twice = fill_gaps(&once, max_gap);
    prop_assert_eq!(once, twice);
    Ok(())
}

pub fn translation_strategy() -> impl Strategy<Value = (usize, usize, u64, f64, f64)> {
    (2usize..30, 1usize..8, any::<u64>(), -1000.0f64..1000.0, -1000.0f64..1000.0)
}

/// Shifting every position by one vector leaves speeds, velocities and
/// centroid distances unchanged.
pub fn check_translation((len, n_animals, seed, sx, sy): (usize, usize, u64, f64, f64)) -> Result<(), TestCaseError> {
    let ds = random_dataset(&[len], n_animals, seed);
    let mut shifted = ds.clone();
    for row in &mut shifted.positions {
        for p in row.iter_mut() {
            p[0] += sx;
            p[1] += sy;
        }
    }
    let fail = |e: flockact::Error| TestCaseError::fail(e.to_string());
    let a = compute_features(&ds).map_err(fail)?;
    let b = compute_features(&shifted).map_err(fail)?;
    prop_assert_eq!(a.len(), b.len());
    for (fa, fb) in a.iter().zip(&b) {
        let pairs = fa
            .speeds
            .iter()
            .zip(&fb.speeds)
            .chain(fa.centroid_dists.iter().zip(&fb.centroid_dists))
            .chain(fa.velocities.iter().flatten().zip(fb.velocities.iter().flatten()));
        for (x, y) in pairs {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }
    Ok(())
}

/// Run `check` on `CASES` generated inputs outside the test harness.
pub fn run_property<S: Strategy>(strategy: S, check: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, check).map(|_| CASES).map_err(|e| e.to_string())
}
