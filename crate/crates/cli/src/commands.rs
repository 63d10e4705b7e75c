use std::fs::File;
use std::io::{self, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use flockact::eval::{evaluate as evaluate_windows, format_report, mean_epoch_accuracy, write_report};
use flockact::nn::{format_epoch_log, init_model, load_checkpoint, save_checkpoint, train_with_eval, Model, ModelKind, TrainConfig};
use flockact::pipeline::{
    self, align_flock, class_distribution, fill_gaps, load_label_csv, load_trajectories, write_label_csv, write_trajectories,
    ActivityLabel, FeatureSet, FeatureSpec, FrameCache, LabelInterval, Split, WindowSet, N_CLASSES,
};
use flockact::session::{export_session as build_session, load_labels_doc, parse_session, write_session, ExportOptions, Span};
use flockact::sim::{simulate as run_simulation, Regimes, SkewedConfig, DEFAULT_DAY_STEPS};
use flockact::stream::run_stream;

use crate::config::FileConfig;
use crate::{EvaluateArgs, ExportSessionArgs, IngestLabelsArgs, PredictStreamArgs, PreprocessArgs, SimulateArgs, TrainArgs};

fn check_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            bail!("input file {} does not exist", p.display());
        }
    }
    Ok(())
}

fn check_outputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if p.is_dir() {
            bail!("output path {} is a directory", p.display());
        }
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                bail!("output directory {} does not exist", dir.display());
            }
        }
    }
    for (i, a) in paths.iter().enumerate() {
        if paths[..i].contains(a) {
            bail!("output path {} given twice", a.display());
        }
    }
    Ok(())
}

fn print_distribution(labels: &[ActivityLabel]) {
    println!("timesteps {}", labels.len());
    for (label, (count, pct)) in ActivityLabel::ALL.iter().zip(class_distribution(labels)) {
        println!("{:<12}{count:>8}{pct:>9.2}%", label.as_str());
    }
}

fn load_cache(path: &Path) -> Result<FrameCache> {
    FrameCache::load(path).with_context(|| format!("loading frame cache {}", path.display()))
}

fn check_animals(model: &Model, cache: &FrameCache, path: &Path) -> Result<()> {
    if model.n_animals != cache.n_animals() {
        let cache_dim = model.features.dim(cache.n_animals());
        return Err(flockact::Error::Validation(format!(
            "checkpoint expects {} animals (input dim {}) but {} has {} animals (input dim {cache_dim})",
            model.n_animals,
            model.input_dim(),
            path.display(),
            cache.n_animals()
        ))
        .into());
    }
    Ok(())
}

fn windows_for(cache: &FrameCache, m: usize, spec: FeatureSpec, path: &Path) -> Result<WindowSet> {
    let windows = WindowSet::from_segments(&cache.segments, m, spec)?;
    if windows.is_empty() {
        bail!("{}: no contiguous run reaches the look-back of {m} steps", path.display());
    }
    Ok(windows)
}

pub fn simulate(a: &SimulateArgs, file: &FileConfig, seed: u64) -> Result<()> {
    check_outputs(&[&a.trajectories, &a.labels])?;
    let s = &file.simulate;
    let split = a.split.or(s.split).unwrap_or(Split::Train);
    let steps = a.steps.or(s.steps);
    let mut regimes = Regimes::default();
    s.regimes.apply(&mut regimes);
    let defaults = SkewedConfig::default();
    let day_steps = steps.unwrap_or(DEFAULT_DAY_STEPS);
    let skewed = SkewedConfig {
        n_animals: a.n_animals.or(s.n_animals).unwrap_or(defaults.n_animals),
        train_steps: day_steps,
        test_steps: day_steps,
        seed,
        arena: s.arena.unwrap_or(defaults.arena),
        noise_std: a.noise_std.or(s.noise_std).unwrap_or(defaults.noise_std),
        regimes,
    };
    let mut cfg = skewed.day(split);
    let schedule = if a.blocks.is_empty() { s.schedule.clone() } else { Some(a.blocks.clone()) };
    if let Some(schedule) = schedule {
        cfg.duration = steps.unwrap_or_else(|| schedule.iter().map(|b| b.0).sum());
        cfg.regime_schedule = schedule;
    }
    cfg.start_time = a.start_time.or(s.start_time).unwrap_or(0);
    let (trajs, labels) = run_simulation(&cfg)?;
    let ds = align_flock(&trajs, &labels, split)?;
    write_trajectories(&a.trajectories, &trajs)?;
    write_label_csv(&a.labels, &labels)?;
    println!("animals {}", trajs.len());
    print_distribution(&ds.labels);
    Ok(())
}

pub fn preprocess(a: &PreprocessArgs, file: &FileConfig) -> Result<()> {
    check_inputs(&[&a.trajectories, &a.labels])?;
    check_outputs(&[&a.out])?;
    let max_gap = a.max_gap.or(file.preprocess.max_gap).unwrap_or(pipeline::DEFAULT_MAX_GAP);
    let trajs = load_trajectories(&a.trajectories)?;
    let labels = load_label_csv(&a.labels)?;
    let (ds, segments) = pipeline::preprocess(&trajs, &labels, a.split, max_gap)?;
    let cache = FrameCache {
        split: a.split,
        animal_ids: ds.animal_ids.clone(),
        segments,
    };
    cache.save(&a.out)?;
    println!("animals {} segments {}", cache.n_animals(), cache.segments.len());
    print_distribution(&cache.labels());
    Ok(())
}

pub fn train(a: &TrainArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut inputs = vec![a.data.as_path()];
    inputs.extend(a.eval_data.as_deref());
    check_inputs(&inputs)?;
    let mut outputs = vec![a.checkpoint.as_path()];
    outputs.extend(a.log.as_deref());
    check_outputs(&outputs)?;

    let t = &file.train;
    let mut cfg = TrainConfig::default();
    t.apply(&mut cfg);
    cfg.seed = seed;
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field {
                cfg.$field = v;
            })*
        };
    }
    flag!(epochs, lookback, hidden_dim, batch_size, learning_rate, dropout_rate, n_filters);
    if a.no_peepholes {
        cfg.peepholes = false;
    }
    cfg.validate()?;
    let kind = a.kind.or(t.kind).unwrap_or(ModelKind::Lstm);
    let spec = FeatureSpec {
        set: a.features.or(t.features).unwrap_or(FeatureSet::Both),
        velocity: a.velocity_encoding.or(t.velocity_encoding).unwrap_or_default(),
    };

    let cache = load_cache(&a.data)?;
    let windows = windows_for(&cache, cfg.lookback, spec, &a.data)?;
    let model = init_model(kind, &windows, cache.n_animals(), N_CLASSES, &cfg)?;
    let eval_set = match &a.eval_data {
        Some(path) => {
            let eval_cache = load_cache(path)?;
            check_animals(&model, &eval_cache, path)?;
            Some(windows_for(&eval_cache, cfg.lookback, spec, path)?)
        }
        None => None,
    };
    if !a.quiet {
        eprintln!("training {kind} on {} windows ({} features, m = {})", windows.len(), spec.set, cfg.lookback);
    }
    let quiet = a.quiet;
    let epochs = cfg.epochs;
    let (model, log) = train_with_eval(model, &windows, &cfg, eval_set.as_ref(), |e| {
        if !quiet {
            let eval = e.eval_accuracy.map(|v| format!(" eval {v:.4}")).unwrap_or_default();
            eprintln!("epoch {}/{epochs} loss {:.4} train {:.4}{eval}", e.epoch, e.loss, e.train_accuracy);
        }
    })?;
    save_checkpoint(&model, &a.checkpoint)?;
    if let Some(path) = &a.log {
        flockact::io::write_atomic(path, format_epoch_log(&log).as_bytes())?;
    }
    let last = log.last().expect("at least one epoch");
    println!("final loss {} train accuracy {}", last.loss, last.train_accuracy);
    let eval: Vec<f64> = log.iter().filter_map(|e| e.eval_accuracy).collect();
    if !eval.is_empty() {
        let (mean, std) = mean_epoch_accuracy(&eval)?;
        println!("eval accuracy over {} epochs {:.2} +/- {:.2} %", eval.len(), 100.0 * mean, 100.0 * std);
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    check_inputs(&[&a.checkpoint, &a.data])?;
    check_outputs(&[&a.report])?;
    let model = load_checkpoint(&a.checkpoint)?;
    let cache = load_cache(&a.data)?;
    check_animals(&model, &cache, &a.data)?;
    let windows = windows_for(&cache, model.lookback, model.features, &a.data)?;
    let report = evaluate_windows(&model, windows.iter())?;
    write_report(&a.report, &report)?;
    print!("{}", format_report(&report)?);
    Ok(())
}

pub fn predict_stream(a: &PredictStreamArgs) -> Result<()> {
    let mut inputs = vec![a.checkpoint.as_path()];
    inputs.extend(a.input.as_deref());
    check_inputs(&inputs)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let stdout = io::stdout().lock();
    let stderr = io::stderr().lock();
    let stats = match &a.input {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            run_stream(&model, BufReader::new(f), stdout, stderr)?
        }
        None => run_stream(&model, io::stdin().lock(), stdout, stderr)?,
    };
    if stats.warnings > 0 {
        eprintln!("{} of {} rows skipped", stats.warnings, stats.rows + stats.warnings);
    }
    Ok(())
}

pub fn export_session(a: &ExportSessionArgs, file: &FileConfig) -> Result<()> {
    let mut inputs = vec![a.trajectories.as_path()];
    inputs.extend(a.labels.as_deref());
    check_inputs(&inputs)?;
    check_outputs(&[&a.out])?;
    let e = &file.export;
    let max_gap = a.max_gap.or(e.max_gap).unwrap_or(pipeline::DEFAULT_MAX_GAP);
    let trajs: Vec<_> = load_trajectories(&a.trajectories)?.iter().map(|t| fill_gaps(t, max_gap)).collect();
    let labels = match &a.labels {
        Some(path) => load_label_csv(path)?,
        None => Vec::new(),
    };
    let opts = ExportOptions {
        max_frames: a.max_frames.or(e.max_frames).unwrap_or(ExportOptions::default().max_frames),
        from: a.from,
        to: a.to,
    };
    let session = build_session(&trajs, &labels, &opts)?;
    write_session(&a.out, &session)?;
    println!(
        "frames {} animals {} labels {}",
        session.timestamps.len(),
        session.animal_ids.len(),
        session.labels.len()
    );
    Ok(())
}

/// Seconds of `span` covered by `labels`, which must not overlap.
fn covered_seconds(labels: &[LabelInterval], span: Span) -> i64 {
    labels
        .iter()
        .map(|l| (l.t_end.min(span.t_end) - l.t_start.max(span.t_start)).max(0))
        .sum()
}

pub fn ingest_labels(a: &IngestLabelsArgs) -> Result<()> {
    let mut inputs = vec![a.input.as_path()];
    inputs.extend(a.session.as_deref());
    check_inputs(&inputs)?;
    check_outputs(&[&a.out])?;
    let doc = load_labels_doc(&a.input)?;
    let mut span = doc.span;
    if let Some(path) = &a.session {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let session = parse_session(&text).with_context(|| format!("session {}", path.display()))?;
        let session_span = session.span().context("session has no frames")?;
        if doc.span.is_some_and(|s| s != session_span) {
            bail!(flockact::Error::Validation(format!(
                "labels span {:?} does not match the session span [{}, {})",
                doc.span, session_span.t_start, session_span.t_end
            )));
        }
        let outside: Vec<String> = doc
            .labels
            .iter()
            .filter(|l| l.t_start < session_span.t_start || l.t_end > session_span.t_end)
            .map(|l| format!("[{}, {}) {}", l.t_start, l.t_end, l.activity))
            .collect();
        if !outside.is_empty() {
            bail!(flockact::Error::Validation(format!("intervals outside the session: {}", outside.join(", "))));
        }
        span = Some(session_span);
    }
    write_label_csv(&a.out, &doc.labels)?;
    match span {
        Some(s) => {
            let total = s.t_end - s.t_start;
            let covered = covered_seconds(&doc.labels, s);
            println!(
                "intervals {} covering {covered} of {total} s ({:.1}%)",
                doc.labels.len(),
                100.0 * covered as f64 / total as f64
            );
        }
        None => println!("intervals {}", doc.labels.len()),
    }
    Ok(())
}
