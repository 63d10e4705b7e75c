//! Online prediction from a stream of whole-flock position rows.
//!
//! Input rows are `timestamp,x1,y1,x2,y2,…` with animals in checkpoint
//! order (sorted ids); an optional first line starting with `timestamp` is
//! treated as a header. Each accepted row yields exactly one output line:
//!
//! ```text
//! <timestamp>,warmup                      fewer than m frames buffered
//! <timestamp>,<label>,<p0>,<p1>,<p2>      label token and class probabilities
//! ```
//!
//! A gap in timestamps (anything other than +1 s) starts a new segment with
//! an empty buffer, mirroring how the offline pipeline splits recordings.
//! Rows that do not parse, or whose timestamp does not increase, are skipped
//! with a warning and leave the buffer untouched.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::{Model, Prepared};
use crate::pipeline::features::{centroid_distances, frame_from_snapshots};
use crate::pipeline::{ActivityLabel, FeatureFrame, FeatureSpec, FeatureWindow, FlockDataset};

#[derive(Debug, Clone, PartialEq)]
pub enum StreamOutput {
    Warmup { t: i64 },
    Prediction { t: i64, label: ActivityLabel, probs: Vec<f64> },
}

impl StreamOutput {
    pub fn to_line(&self) -> String {
        match self {
            StreamOutput::Warmup { t } => format!("{t},warmup"),
            StreamOutput::Prediction { t, label, probs } => {
                let mut s = format!("{t},{}", label.as_str());
                for p in probs {
                    s.push_str(&format!(",{p}"));
                }
                s
            }
        }
    }
}

/// Rolling-buffer predictor. Memory is bounded by the look-back window.
pub struct StreamPredictor<'m> {
    model: &'m Model,
    prepared: Prepared<'m>,
    spec: FeatureSpec,
    m: usize,
    dim: usize,
    last: Option<(i64, Vec<[f64; 2]>)>,
    /// Rows seen in the current segment.
    seg_rows: usize,
    frames: VecDeque<Vec<f64>>,
    window: Vec<f64>,
}

impl<'m> StreamPredictor<'m> {
    pub fn new(model: &'m Model) -> Result<Self> {
        model.validate()?;
        if model.lookback < 2 {
            return Err(Error::contract("streaming needs a look-back of at least 2 steps"));
        }
        let spec = model.features;
        Ok(StreamPredictor {
            model,
            prepared: model.prepare(),
            spec,
            m: model.lookback,
            dim: spec.dim(model.n_animals),
            last: None,
            seg_rows: 0,
            frames: VecDeque::with_capacity(model.lookback + 1),
            window: Vec::with_capacity(model.lookback * spec.dim(model.n_animals)),
        })
    }

    pub fn n_animals(&self) -> usize {
        self.model.n_animals
    }

    /// Feature frames currently held; never more than the look-back.
    pub fn buffered_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.seg_rows = 0;
        self.frames.clear();
    }

    fn push_features(&mut self, frame: &FeatureFrame) {
        let mut row = Vec::with_capacity(self.dim);
        self.spec.push_frame(frame, &mut row);
        if self.frames.len() == self.m {
            self.frames.pop_front();
        }
        self.frames.push_back(row);
    }

    /// Feed one snapshot. Errors only on a wrong animal count or a
    /// non-increasing timestamp, in which case the state is unchanged.
    pub fn push(&mut self, t: i64, positions: &[[f64; 2]]) -> Result<StreamOutput> {
        if positions.len() != self.model.n_animals {
            return Err(Error::shape("stream row", format!("{} animals", positions.len()), format!("{} animals", self.model.n_animals)));
        }
        if let Some((prev_t, _)) = &self.last {
            if t <= *prev_t {
                return Err(Error::Validation(format!("timestamp {t} does not follow {prev_t}")));
            }
            if t != prev_t + 1 {
                self.reset();
            }
        }
        match self.last.take() {
            None => {
                self.seg_rows = 1;
            }
            Some((prev_t, prev)) => {
                let frame = frame_from_snapshots(&prev, positions, (t - prev_t) as f64);
                if self.seg_rows == 1 {
                    // the segment's first frame borrows this step's motion
                    let first = FeatureFrame {
                        speeds: frame.speeds.clone(),
                        centroid_dists: centroid_distances(&prev),
                        velocities: frame.velocities.clone(),
                    };
                    self.push_features(&first);
                }
                self.push_features(&frame);
                self.seg_rows += 1;
            }
        }
        self.last = Some((t, positions.to_vec()));

        if self.frames.len() < self.m {
            return Ok(StreamOutput::Warmup { t });
        }
        self.window.clear();
        for row in &self.frames {
            self.window.extend_from_slice(row);
        }
        let view = FeatureWindow {
            data: &self.window,
            dim: self.dim,
            target: ActivityLabel::NotActive,
            t_end: t,
        };
        let (label, probs) = self.prepared.predict(&view)?;
        Ok(StreamOutput::Prediction {
            t,
            label: ActivityLabel::from_index(label)?,
            probs,
        })
    }
}

/// Parse `timestamp,x1,y1,…` for `n_animals` animals.
pub fn parse_stream_row(line: &str, n_animals: usize) -> Result<(i64, Vec<[f64; 2]>)> {
    let mut fields = line.split(',').map(str::trim);
    let bad = |msg: String| Error::Parse { line: 0, msg };
    let t_field = fields.next().unwrap_or("");
    let t: i64 = t_field.parse().map_err(|_| bad(format!("bad timestamp `{t_field}`")))?;
    let values: Vec<f64> = fields
        .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(format!("bad coordinate `{f}`"))))
        .collect::<Result<_>>()?;
    if values.len() != 2 * n_animals {
        return Err(bad(format!("expected {} coordinates, found {}", 2 * n_animals, values.len())));
    }
    Ok((t, values.chunks_exact(2).map(|c| [c[0], c[1]]).collect()))
}

pub fn format_stream_row(t: i64, positions: &[[f64; 2]]) -> String {
    let mut s = t.to_string();
    for p in positions {
        s.push_str(&format!(",{},{}", p[0], p[1]));
    }
    s
}

/// The aligned dataset as stream input, one line per timestep.
pub fn dataset_stream_lines(ds: &FlockDataset) -> impl Iterator<Item = String> + '_ {
    ds.timestamps
        .iter()
        .zip(&ds.positions)
        .map(|(&t, p)| format_stream_row(t, p))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub rows: u64,
    pub predictions: u64,
    pub warnings: u64,
}

/// Read rows from `input` until EOF, writing one line per accepted row to
/// `output` and one `warning:` line per skipped row to `warnings`.
pub fn run_stream(model: &Model, input: impl BufRead, mut output: impl Write, mut warnings: impl Write) -> Result<StreamStats> {
    let mut predictor = StreamPredictor::new(model)?;
    let n = predictor.n_animals();
    let mut stats = StreamStats::default();
    let io_err = |e: std::io::Error| Error::io("<stream>", e);
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 1 && trimmed.starts_with("timestamp")) {
            continue;
        }
        let result = parse_stream_row(trimmed, n).and_then(|(t, pos)| predictor.push(t, &pos));
        match result {
            Ok(out) => {
                stats.rows += 1;
                if matches!(out, StreamOutput::Prediction { .. }) {
                    stats.predictions += 1;
                }
                writeln!(output, "{}", out.to_line()).map_err(io_err)?;
            }
            Err(e @ (Error::Parse { .. } | Error::Validation(_) | Error::Shape { .. })) => {
                stats.warnings += 1;
                writeln!(warnings, "warning: line {lineno}: {e}; row skipped").map_err(io_err)?;
            }
            Err(e) => return Err(e),
        }
    }
    output.flush().map_err(io_err)?;
    Ok(stats)
}
