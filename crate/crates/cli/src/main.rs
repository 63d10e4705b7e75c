use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flockact::nn::ModelKind;
use flockact::pipeline::{ActivityLabel, FeatureSet, Split, VelocityEncoding};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "flockact", version, about = "Collective flock activity recognition")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for simulation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a labelled flock day.
    Simulate(SimulateArgs),
    /// Gap-fill, align and featurize trajectories into a frame cache.
    Preprocess(PreprocessArgs),
    /// Train a model on a frame cache.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a frame cache.
    Evaluate(EvaluateArgs),
    /// Predict online from flock position rows on stdin.
    PredictStream(PredictStreamArgs),
    /// Write a labelling session for the viewer.
    ExportSession(ExportSessionArgs),
    /// Convert a labels document from the viewer into a label CSV.
    IngestLabels(IngestLabelsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output trajectory CSV.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Output label CSV.
    #[arg(long)]
    pub labels: PathBuf,
    /// Day whose label shares to imitate.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<Split>,
    /// Length of the day in seconds.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub n_animals: Option<usize>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Timestamp of the first sample.
    #[arg(long)]
    pub start_time: Option<i64>,
    /// Explicit regime blocks as `seconds:label`, e.g. `600:not_active`.
    #[arg(long = "block", value_parser = parse_block)]
    pub blocks: Vec<(u64, ActivityLabel)>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_parser = parse_split)]
    pub split: Split,
    /// Output frame cache.
    #[arg(long)]
    pub out: PathBuf,
    /// Longest outage in seconds that is interpolated.
    #[arg(long)]
    pub max_gap: Option<i64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training frame cache.
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output per-epoch log CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Frame cache scored after every epoch.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<ModelKind>,
    #[arg(long)]
    pub features: Option<FeatureSet>,
    #[arg(long, value_parser = parse_encoding)]
    pub velocity_encoding: Option<VelocityEncoding>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub n_filters: Option<usize>,
    /// Drop the cell-state terms from the gates.
    #[arg(long)]
    pub no_peepholes: bool,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output report.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictStreamArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Read rows from a file instead of stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportSessionArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Existing label CSV to include.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output session JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_frames: Option<usize>,
    #[arg(long)]
    pub max_gap: Option<i64>,
    /// First timestamp to keep.
    #[arg(long)]
    pub from: Option<i64>,
    /// Keep timestamps before this one.
    #[arg(long)]
    pub to: Option<i64>,
}

#[derive(Debug, Args)]
pub struct IngestLabelsArgs {
    /// Labels JSON written by the viewer.
    #[arg(long)]
    pub input: PathBuf,
    /// Output label CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Session the labels belong to, for the coverage check.
    #[arg(long)]
    pub session: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split `{other}` (expected train or test)")),
    }
}

fn parse_encoding(s: &str) -> Result<VelocityEncoding, String> {
    match s {
        "speed" => Ok(VelocityEncoding::Speed),
        "components" => Ok(VelocityEncoding::Components),
        other => Err(format!("unknown velocity encoding `{other}` (expected speed or components)")),
    }
}

fn parse_block(s: &str) -> Result<(u64, ActivityLabel), String> {
    let (secs, label) = s.split_once(':').ok_or("expected `seconds:label`")?;
    let secs = secs.parse().map_err(|_| format!("bad block length `{secs}`"))?;
    let label = label.parse().map_err(|e: flockact::Error| e.to_string())?;
    Ok((secs, label))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::load_config(cli.config.as_deref()).and_then(|file| {
        let seed = cli.seed.or(file.seed).unwrap_or(0);
        match cli.command {
            Command::Simulate(a) => commands::simulate(&a, &file, seed),
            Command::Preprocess(a) => commands::preprocess(&a, &file),
            Command::Train(a) => commands::train(&a, &file, seed),
            Command::Evaluate(a) => commands::evaluate(&a),
            Command::PredictStream(a) => commands::predict_stream(&a),
            Command::ExportSession(a) => commands::export_session(&a, &file),
            Command::IngestLabels(a) => commands::ingest_labels(&a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
