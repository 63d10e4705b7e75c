#![allow(dead_code)]

pub mod dd;
pub mod oracles;
pub mod props;

use flockact::nn::{cross_entropy, FeatureStats, Model, ModelKind, TrainConfig};
use flockact::pipeline::{ActivityLabel, FeatureSet, FeatureSpec, FeatureWindow};
use flockact::rng::Rng;

/// Relative/absolute comparison used by every gradient check.
pub fn grad_close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    if scale > 1e-8 {
        (analytic - numeric).abs() / scale <= 1e-4
    } else {
        (analytic - numeric).abs() <= 1e-7
    }
}

/// Small random model with non-trivial normalization and peepholes.
pub fn random_model(kind: ModelKind, n_animals: usize, hidden: usize, m: usize, filters: usize, seed: u64) -> Model {
    let spec = FeatureSpec::new(FeatureSet::Both);
    let d = spec.dim(n_animals);
    let mut rng = Rng::new(seed ^ 0xABCD);
    let stats = FeatureStats {
        mean: (0..d).map(|_| rng.uniform(-0.5, 0.5).unwrap()).collect(),
        std: (0..d).map(|_| rng.uniform(0.5, 2.0).unwrap()).collect(),
    };
    let cfg = TrainConfig {
        lookback: m,
        hidden_dim: hidden,
        n_filters: filters,
        seed,
        ..Default::default()
    };
    let mut model = Model::new(kind, spec, n_animals, stats, 3, &cfg).unwrap();
    // perturb biases so every parameter sits away from symmetric points
    for t in model.net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.uniform(-0.3, 0.3).unwrap();
        }
    }
    model
}

pub fn random_window_data(rng: &mut Rng, len: usize, dim: usize) -> Vec<f64> {
    (0..len * dim).map(|_| rng.uniform(-1.5, 1.5).unwrap()).collect()
}

pub fn window(data: &[f64], dim: usize, target: ActivityLabel) -> FeatureWindow<'_> {
    FeatureWindow { data, dim, target, t_end: 0 }
}

pub fn loss_with_mask(model: &Model, w: &FeatureWindow<'_>, mask: &Option<Vec<f64>>, target: &[f64]) -> f64 {
    let (probs, _) = model.forward_with_mask(w, mask.clone()).unwrap();
    cross_entropy(&probs, target).unwrap()
}

pub struct GradReport {
    pub checked: usize,
    pub failures: Vec<String>,
    pub max_rel: f64,
}

/// Compare every analytic parameter gradient with a central difference
/// (step 1e-5) of the loss, perturbing one scalar at a time.
pub fn check_all_gradients(model: &Model, w: &FeatureWindow<'_>, mask: Option<Vec<f64>>, target: &[f64]) -> GradReport {
    let (_, cache) = model.forward_with_mask(w, mask.clone()).unwrap();
    let grads = model.backward(&cache, target).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut report = GradReport { checked: 0, failures: Vec::new(), max_rel: 0.0 };
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        for ei in 0..analytic[ti].len() {
            let orig = probe.net.tensors()[ti][ei];
            probe.net.tensors_mut()[ti][ei] = orig + h;
            let up = loss_with_mask(&probe, w, &mask, target);
            probe.net.tensors_mut()[ti][ei] = orig - h;
            let down = loss_with_mask(&probe, w, &mask, target);
            probe.net.tensors_mut()[ti][ei] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[ti][ei];
            report.checked += 1;
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                report.max_rel = report.max_rel.max((a - numeric).abs() / scale);
            }
            if !grad_close(a, numeric) {
                report.failures.push(format!("tensor {ti} elem {ei}: analytic {a:e} numeric {numeric:e}"));
            }
        }
    }
    report
}

/// A short simulated day with every regime present.
pub fn small_day(n_animals: usize, steps: u64, seed: u64) -> flockact::pipeline::FlockDataset {
    use flockact::pipeline::{align_flock, Split};
    use flockact::sim::{simulate, SimConfig};
    let third = steps / 3;
    let cfg = SimConfig {
        n_animals,
        duration: steps,
        seed,
        regime_schedule: vec![
            (third, ActivityLabel::NotActive),
            (third, ActivityLabel::HerdMovement),
            (steps - 2 * third, ActivityLabel::Active),
        ],
        ..SimConfig::default()
    };
    let (trajs, labels) = simulate(&cfg).unwrap();
    align_flock(&trajs, &labels, Split::Train).unwrap()
}

/// Feed `ds` row by row through the streaming predictor and compare every
/// prediction with the batch prediction of the window ending at the same
/// timestep. Returns the number of predictions compared.
pub fn check_stream_equivalence(model: &Model, ds: &flockact::pipeline::FlockDataset) -> Result<usize, String> {
    use flockact::pipeline::{build_segments, WindowSet};
    use flockact::stream::{dataset_stream_lines, run_stream};
    use std::collections::BTreeMap;

    let segments = build_segments(ds).map_err(|e| e.to_string())?;
    let windows = WindowSet::from_segments(&segments, model.lookback, model.features).map_err(|e| e.to_string())?;
    let mut offline = BTreeMap::new();
    for w in windows.iter() {
        let (label, probs) = model.predict(&w).map_err(|e| e.to_string())?;
        offline.insert(w.t_end, (label, probs));
    }

    let input: String = dataset_stream_lines(ds).map(|l| l + "\n").collect();
    let mut out = Vec::new();
    let mut warn = Vec::new();
    let stats = run_stream(model, input.as_bytes(), &mut out, &mut warn).map_err(|e| e.to_string())?;
    if stats.warnings != 0 {
        return Err(format!("{} unexpected warnings", stats.warnings));
    }
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != ds.len() {
        return Err(format!("{} output lines for {} rows", lines.len(), ds.len()));
    }
    let mut compared = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let t: i64 = fields[0].parse().map_err(|_| format!("bad line {line}"))?;
        match (fields.get(1), offline.get(&t)) {
            (Some(&"warmup"), None) => {}
            (Some(&"warmup"), Some(_)) => return Err(format!("warmup at {t} where a window exists")),
            (Some(token), Some((label, probs))) => {
                let expected = format!("{t},{}", ActivityLabel::from_index(*label).unwrap().as_str());
                let expected = probs.iter().fold(expected, |s, p| format!("{s},{p}"));
                if line != expected {
                    return Err(format!("at {t}: stream `{line}` vs batch `{expected}` ({token})"));
                }
                compared += 1;
            }
            (_, None) => return Err(format!("prediction at {t} without a batch window")),
            (None, _) => return Err(format!("empty line at {t}")),
        }
    }
    if compared != windows.len() {
        return Err(format!("compared {compared} of {} windows", windows.len()));
    }
    Ok(compared)
}
