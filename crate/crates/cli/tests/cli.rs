use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use flockact::eval::parse_report;
use flockact::pipeline::{load_label_csv, load_trajectories};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flockact"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn flockact")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = run(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn p(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.p(name).to_str().unwrap().to_string()
    }
}

const SCHEDULE: [&str; 6] = ["--block", "100:not_active", "--block", "60:herd", "--block", "140:active"];

fn simulate(d: &Dir, prefix: &str, n_animals: &str, seed: &str) {
    let traj = d.s(&format!("{prefix}traj.csv"));
    let labels = d.s(&format!("{prefix}labels.csv"));
    let mut args = vec!["simulate", "--seed", seed, "--n-animals", n_animals, "--trajectories", &traj, "--labels", &labels];
    args.extend(SCHEDULE);
    ok(&args);
}

fn preprocess(d: &Dir, prefix: &str, split: &str) {
    ok(&[
        "preprocess",
        "--trajectories",
        &d.s(&format!("{prefix}traj.csv")),
        "--labels",
        &d.s(&format!("{prefix}labels.csv")),
        "--split",
        split,
        "--out",
        &d.s(&format!("{prefix}frames.txt")),
    ]);
}

fn train(data: &str, ckpt: &str, extra: &[&str]) -> String {
    let mut args = vec![
        "train",
        "--data",
        data,
        "--checkpoint",
        ckpt,
        "--epochs",
        "2",
        "--lookback",
        "6",
        "--hidden-dim",
        "5",
        "--n-filters",
        "3",
        "--quiet",
    ];
    args.extend(extra);
    ok(&args)
}

#[test]
fn simulate_writes_parseable_deterministic_files() {
    let d = Dir::new();
    simulate(&d, "a_", "4", "3");
    simulate(&d, "b_", "4", "3");
    simulate(&d, "c_", "4", "4");
    let read = |n: &str| std::fs::read(d.p(n)).unwrap();
    assert_eq!(read("a_traj.csv"), read("b_traj.csv"));
    assert_eq!(read("a_labels.csv"), read("b_labels.csv"));
    assert_ne!(read("a_traj.csv"), read("c_traj.csv"));
    let trajs = load_trajectories(&d.p("a_traj.csv")).unwrap();
    assert_eq!(trajs.len(), 4);
    assert!(trajs.iter().all(|t| t.samples.len() == 300));
    assert_eq!(load_label_csv(&d.p("a_labels.csv")).unwrap().len(), 3);
}

#[test]
fn simulate_prints_class_distribution() {
    let d = Dir::new();
    let out = ok(&["simulate", "--n-animals", "3", "--steps", "2000", "--trajectories", &d.s("t.csv"), "--labels", &d.s("l.csv")]);
    assert!(out.contains("timesteps 2000"), "{out}");
    assert!(out.contains("herd"));
}

#[test]
fn schedule_mismatch_is_a_config_error() {
    let d = Dir::new();
    let mut args = vec!["simulate", "--steps", "500", "--trajectories", "", "--labels", ""];
    let (t, l) = (d.s("t.csv"), d.s("l.csv"));
    args[4] = &t;
    args[6] = &l;
    args.extend(SCHEDULE);
    let err = fail(&args);
    assert!(err.contains("regime schedule sums to 300 s but duration is 500 s"), "{err}");
    assert!(!d.p("t.csv").exists());
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let d = Dir::new();
    std::fs::write(d.p("bad.toml"), "[simulate]\nanimals = 3\n").unwrap();
    let err = fail(&["--config", &d.s("bad.toml"), "simulate", "--trajectories", &d.s("t.csv"), "--labels", &d.s("l.csv")]);
    assert!(err.contains("animals"), "{err}");

    std::fs::write(
        d.p("run.toml"),
        "seed = 5\n[simulate]\nn_animals = 3\nsteps = 40\nschedule = [[20, \"not_active\"], [20, \"active\"]]\n",
    )
    .unwrap();
    ok(&["--config", &d.s("run.toml"), "simulate", "--trajectories", &d.s("f.csv"), "--labels", &d.s("fl.csv")]);
    assert_eq!(load_trajectories(&d.p("f.csv")).unwrap().len(), 3);
    // flag beats file
    ok(&["--config", &d.s("run.toml"), "simulate", "--n-animals", "2", "--trajectories", &d.s("g.csv"), "--labels", &d.s("gl.csv")]);
    assert_eq!(load_trajectories(&d.p("g.csv")).unwrap().len(), 2);
    // the file seed equals an explicit --seed 5
    ok(&["simulate", "--seed", "5", "--n-animals", "3", "--steps", "40", "--block", "20:not_active", "--block", "20:active",
        "--trajectories", &d.s("h.csv"), "--labels", &d.s("hl.csv")]);
    assert_eq!(std::fs::read(d.p("f.csv")).unwrap(), std::fs::read(d.p("h.csv")).unwrap());
}

#[test]
fn missing_inputs_and_output_dirs_are_rejected_up_front() {
    let d = Dir::new();
    let err = fail(&["preprocess", "--trajectories", &d.s("nope.csv"), "--labels", &d.s("x.csv"), "--split", "train", "--out", &d.s("o.txt")]);
    assert!(err.contains("does not exist"), "{err}");
    simulate(&d, "", "3", "1");
    let err = fail(&[
        "preprocess",
        "--trajectories",
        &d.s("traj.csv"),
        "--labels",
        &d.s("labels.csv"),
        "--split",
        "train",
        "--out",
        &d.s("missing/o.txt"),
    ]);
    assert!(err.contains("output directory"), "{err}");
}

#[test]
fn pipeline_end_to_end_and_dimension_checks() {
    let d = Dir::new();
    simulate(&d, "", "4", "1");
    preprocess(&d, "", "train");
    let out = train(&d.s("frames.txt"), &d.s("model.json"), &["--log", &d.s("log.csv"), "--eval-data", &d.s("frames.txt")]);
    assert!(out.contains("eval accuracy over 2 epochs"), "{out}");
    let log = std::fs::read_to_string(d.p("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let printed = ok(&["evaluate", "--checkpoint", &d.s("model.json"), "--data", &d.s("frames.txt"), "--report", &d.s("report.txt")]);
    let text = std::fs::read_to_string(d.p("report.txt")).unwrap();
    assert_eq!(printed, text);
    let report = parse_report(&text).unwrap();
    assert_eq!(report.n_samples, 300 - 6 + 1);

    simulate(&d, "wide_", "5", "1");
    preprocess(&d, "wide_", "test");
    let err = fail(&["evaluate", "--checkpoint", &d.s("model.json"), "--data", &d.s("wide_frames.txt"), "--report", &d.s("r2.txt")]);
    assert!(err.contains("4 animals (input dim 8)") && err.contains("5 animals (input dim 10)"), "{err}");
    assert!(!d.p("r2.txt").exists());
}

#[test]
fn predict_stream_warms_up_then_predicts() {
    let d = Dir::new();
    simulate(&d, "", "2", "2");
    preprocess(&d, "", "train");
    train(&d.s("frames.txt"), &d.s("model.json"), &[]);
    let trajs = load_trajectories(&d.p("traj.csv")).unwrap();
    let mut input = String::from("timestamp,x1,y1,x2,y2\n");
    for k in 0..10 {
        let (a, b) = (trajs[0].samples[k], trajs[1].samples[k]);
        input.push_str(&format!("{},{},{},{},{}\n", a.t, a.x, a.y, b.x, b.y));
        if k == 7 {
            input.push_str("garbage\n");
        }
    }
    let mut child = bin()
        .args(["predict-stream", "--checkpoint", &d.s("model.json")])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[..5].iter().all(|l| l.ends_with(",warmup")));
    for l in &lines[5..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 5, "{l}");
        let s: f64 = f[2..].iter().map(|p| p.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("warning: line 10"), "{stderr}");
}

fn write_labels_json(path: &Path, body: &str) {
    std::fs::write(path, format!("{{\"format\":\"flockact-labels\",\"version\":1,\"labels\":[{body}]}}")).unwrap();
}

#[test]
fn session_export_and_label_ingest() {
    let d = Dir::new();
    simulate(&d, "", "3", "4");
    let out = ok(&["export-session", "--trajectories", &d.s("traj.csv"), "--labels", &d.s("labels.csv"), "--out", &d.s("s.json")]);
    assert!(out.contains("frames 300"), "{out}");
    let session = flockact::session::parse_session(&std::fs::read_to_string(d.p("s.json")).unwrap()).unwrap();
    std::fs::write(d.p("doc.json"), flockact::session::labels_to_string(&session.labels_doc())).unwrap();
    let out = ok(&["ingest-labels", "--input", &d.s("doc.json"), "--session", &d.s("s.json"), "--out", &d.s("back.csv")]);
    assert!(out.contains("covering 300 of 300 s"), "{out}");
    assert_eq!(std::fs::read(d.p("back.csv")).unwrap(), std::fs::read(d.p("labels.csv")).unwrap());

    write_labels_json(&d.p("one.json"), r#"{"t_start":0,"t_end":100,"activity":"herd"}"#);
    ok(&["ingest-labels", "--input", &d.s("one.json"), "--out", &d.s("one.csv")]);
    assert_eq!(std::fs::read_to_string(d.p("one.csv")).unwrap().lines().count(), 2);

    write_labels_json(&d.p("touch.json"), r#"{"t_start":0,"t_end":10,"activity":"active"},{"t_start":10,"t_end":20,"activity":"herd"}"#);
    ok(&["ingest-labels", "--input", &d.s("touch.json"), "--out", &d.s("touch.csv")]);

    write_labels_json(&d.p("over.json"), r#"{"t_start":0,"t_end":10,"activity":"active"},{"t_start":5,"t_end":15,"activity":"herd"}"#);
    let err = fail(&["ingest-labels", "--input", &d.s("over.json"), "--out", &d.s("over.csv")]);
    assert!(err.contains("[0, 10)") && err.contains("[5, 15)"), "{err}");
    assert!(!d.p("over.csv").exists());

    write_labels_json(&d.p("late.json"), r#"{"t_start":250,"t_end":400,"activity":"active"}"#);
    let err = fail(&["ingest-labels", "--input", &d.s("late.json"), "--session", &d.s("s.json"), "--out", &d.s("late.csv")]);
    assert!(err.contains("outside the session"), "{err}");
}

#[test]
fn export_rejects_bad_input_without_partial_output() {
    let d = Dir::new();
    std::fs::write(d.p("bad.csv"), "animal_id,timestamp,x,y\na,0,0,0\na,1,zz,0\n").unwrap();
    let err = fail(&["export-session", "--trajectories", &d.s("bad.csv"), "--out", &d.s("s.json")]);
    assert!(err.contains("parse error"), "{err}");
    assert!(!d.p("s.json").exists());
    simulate(&d, "", "2", "1");
    let err = fail(&["export-session", "--trajectories", &d.s("traj.csv"), "--max-frames", "100", "--out", &d.s("s.json")]);
    assert!(err.contains("--from/--to"), "{err}");
    ok(&["export-session", "--trajectories", &d.s("traj.csv"), "--max-frames", "100", "--from", "50", "--to", "150", "--out", &d.s("s.json")]);
}
