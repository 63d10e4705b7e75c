//! The two architectures: LSTM and CNN+LSTM, each followed by a dense
//! softmax head on the last hidden output (many-to-one).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::conv::Conv1dParams;
use super::dense::DenseParams;
use super::lstm::{dropout_mask, LstmParams, LstmSequenceCache, PackedGates};
use crate::error::{Error, Result};
use crate::numeric::{argmax, softmax_slice};
use crate::pipeline::{FeatureSpec, FeatureWindow, WindowSet};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    CnnLstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Lstm, ModelKind::CnnLstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::CnnLstm => "cnn_lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "cnn_lstm" | "cnn-lstm" => Ok(ModelKind::CnnLstm),
            other => Err(Error::Config(format!("unknown model kind `{other}` (expected lstm or cnn_lstm)"))),
        }
    }
}

/// Trainable parameters. Gradients and Adam moments reuse this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub conv: Option<Conv1dParams>,
    pub lstm: LstmParams,
    pub head: DenseParams,
}

impl Network {
    /// All parameter tensors in canonical order: conv kernels and biases,
    /// the LSTM tensors, then head weight and bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        if let Some(c) = &self.conv {
            t.extend(c.tensors());
        }
        t.extend(self.lstm.tensors());
        t.extend(self.head.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        if let Some(c) = &mut self.conv {
            t.extend(c.tensors_mut());
        }
        t.extend(self.lstm.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    pub fn zeros_like(&self) -> Network {
        Network {
            conv: self.conv.as_ref().map(Conv1dParams::zeros_like),
            lstm: self.lstm.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Network, scale: f64) -> Result<()> {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        check_same_layout(&dst.iter().map(|t| t.len()).collect::<Vec<_>>(), &src)?;
        for (d, s) in dst.iter_mut().zip(src) {
            for (a, &b) in d.iter_mut().zip(s) {
                *a += scale * b;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_same_layout(lens: &[usize], other: &[&[f64]]) -> Result<()> {
    let other_lens: Vec<usize> = other.iter().map(|t| t.len()).collect();
    if lens != other_lens.as_slice() {
        return Err(Error::shape("parameter layout", format!("{lens:?}"), format!("{other_lens:?}")));
    }
    Ok(())
}

/// Per-feature z-score statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(dim: usize) -> Self {
        FeatureStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation per column. Near-constant
    /// columns get unit scale.
    pub fn from_rows<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        for r in rows.clone() {
            if r.len() != dim {
                return Err(Error::shape("FeatureStats", r.len(), dim));
            }
            for (m, &x) in mean.iter_mut().zip(r) {
                *m += x;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::contract("feature statistics need at least one row"));
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, &x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(FeatureStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn normalize(&self, data: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(data.len());
        for row in data.chunks_exact(d) {
            out.extend(row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub net: Network,
    pub feature_stats: FeatureStats,
    pub n_classes: usize,
    pub features: FeatureSpec,
    pub n_animals: usize,
    pub lookback: usize,
}

/// Forward-pass behaviour.
pub enum Mode<'a> {
    Inference,
    /// Draw a fresh dropout mask for the final hidden output.
    Training { dropout_rate: f64, rng: &'a mut Rng },
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    window_len: usize,
    input: Vec<f64>,
    conv_pre: Option<Vec<f64>>,
    lstm: LstmSequenceCache,
    head_in: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardCache {
    pub fn dropout_mask(&self) -> Option<&[f64]> {
        self.lstm.mask.as_deref()
    }
}

impl Model {
    /// Fresh model with seeded initialization (conv, then LSTM, then head).
    pub fn new(kind: ModelKind, features: FeatureSpec, n_animals: usize, feature_stats: FeatureStats, n_classes: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let input_dim = features.dim(n_animals);
        if feature_stats.dim() != input_dim {
            return Err(Error::shape("Model::new", format!("feature stats dim {}", feature_stats.dim()), format!("input dim {input_dim}")));
        }
        let mut rng = Rng::new(derive_seed(cfg.seed, 0));
        let conv = match kind {
            ModelKind::Lstm => None,
            ModelKind::CnnLstm => Some(Conv1dParams::init(input_dim, cfg.n_filters, cfg.kernel_len, cfg.stride, &mut rng)?),
        };
        let lstm_in = conv.as_ref().map_or(input_dim, |c| c.n_filters);
        let lstm = LstmParams::init(lstm_in, cfg.hidden_dim, cfg.peepholes, &mut rng);
        let head = DenseParams::init(cfg.hidden_dim, n_classes, &mut rng);
        let model = Model {
            kind,
            net: Network { conv, lstm, head },
            feature_stats,
            n_classes,
            features,
            n_animals,
            lookback: cfg.lookback,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.features.dim(self.n_animals)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.input_dim();
        if self.feature_stats.dim() != d || self.feature_stats.std.len() != d {
            return Err(Error::shape("Model", format!("feature stats dim {}", self.feature_stats.dim()), format!("input dim {d}")));
        }
        let lstm_in = match (&self.net.conv, self.kind) {
            (None, ModelKind::Lstm) => d,
            (Some(c), ModelKind::CnnLstm) => {
                c.validate()?;
                if c.in_channels != d {
                    return Err(Error::shape("Model", format!("conv in_channels {}", c.in_channels), format!("input dim {d}")));
                }
                c.n_filters
            }
            _ => return Err(Error::contract("conv layer must be present exactly for cnn_lstm")),
        };
        self.net.lstm.validate()?;
        if self.net.lstm.input_dim != lstm_in {
            return Err(Error::shape("Model", format!("lstm input_dim {}", self.net.lstm.input_dim), lstm_in));
        }
        self.net.head.validate()?;
        if self.net.head.in_dim() != self.net.lstm.hidden_dim || self.net.head.out_dim() != self.n_classes {
            return Err(Error::shape(
                "Model",
                format!("head {}", self.net.head.w.shape_str()),
                format!("{}x{}", self.n_classes, self.net.lstm.hidden_dim),
            ));
        }
        if self.lookback == 0 {
            return Err(Error::contract("lookback must be positive"));
        }
        Ok(())
    }

    fn check_window(&self, window: &FeatureWindow<'_>) -> Result<()> {
        let d = self.input_dim();
        if window.dim != d || window.data.len() % d.max(1) != 0 {
            return Err(Error::shape("forward", format!("window feature dim {}", window.dim), format!("model input dim {d}")));
        }
        let len = window.len();
        match &self.net.conv {
            None if len != self.lookback => Err(Error::shape("forward", format!("window length {len}"), format!("lookback {}", self.lookback))),
            Some(c) if len < c.kernel_len => Err(Error::shape("forward", format!("window length {len}"), format!("kernel_len {}", c.kernel_len))),
            _ if len == 0 => Err(Error::contract("empty window")),
            _ => Ok(()),
        }
    }

    /// Regroup the weights once for any number of forward passes.
    pub fn prepare(&self) -> Prepared<'_> {
        Prepared {
            model: self,
            conv: self.net.conv.as_ref().map(Conv1dParams::pack),
            lstm: self.net.lstm.pack(),
        }
    }

    pub fn forward(&self, window: &FeatureWindow<'_>, mode: Mode<'_>) -> Result<(Vec<f64>, ForwardCache)> {
        self.prepare().forward(window, mode)
    }

    /// Forward pass with an explicit dropout mask on the final hidden output.
    pub fn forward_with_mask(&self, window: &FeatureWindow<'_>, mask: Option<Vec<f64>>) -> Result<(Vec<f64>, ForwardCache)> {
        self.prepare().forward_with_mask(window, mask)
    }

    /// Exact gradients of `cross_entropy(forward(window), target)` with
    /// respect to every parameter, given the cache of that forward call.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<Network> {
        let mut grads = self.net.zeros_like();
        self.backward_into(cache, target, &mut grads)?;
        Ok(grads)
    }

    /// As [`Model::backward`], adding the gradients into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, target: &[f64], grads: &mut Network) -> Result<()> {
        let k = self.n_classes;
        if target.len() != k || cache.probs.len() != k {
            return Err(Error::shape("backward", format!("target len {}", target.len()), format!("{k} classes")));
        }
        let d = self.input_dim();
        let lstm = &self.net.lstm;
        let steps_ok = cache
            .lstm
            .steps
            .first()
            .is_some_and(|s| s.x.len() == lstm.input_dim && s.h.len() == lstm.hidden_dim);
        let conv_ok = match (&self.net.conv, &cache.conv_pre) {
            (None, None) => cache.lstm.steps.len() == cache.window_len,
            (Some(c), Some(pre)) => pre.len() == c.n_filters * cache.lstm.steps.len(),
            _ => false,
        };
        if !steps_ok || !conv_ok || cache.input.len() != cache.window_len * d || cache.head_in.len() != lstm.hidden_dim {
            return Err(Error::contract("forward cache does not match this model"));
        }
        let lens: Vec<usize> = self.net.tensors().iter().map(|t| t.len()).collect();
        check_same_layout(&lens, &grads.tensors())?;
        if grads.conv.is_some() != self.net.conv.is_some() || grads.lstm.hidden_dim != lstm.hidden_dim {
            return Err(Error::shape("backward", "gradient buffer layout", "model layout"));
        }

        let dlogits: Vec<f64> = cache.probs.iter().zip(target).map(|(p, t)| p - t).collect();
        grads.head.w.add_outer(&dlogits, &cache.head_in);
        for (g, d) in grads.head.b.0.iter_mut().zip(&dlogits) {
            *g += d;
        }
        let mut dh = vec![0.0; lstm.hidden_dim];
        self.net.head.w.matvec_t_acc(&dlogits, &mut dh);
        if let Some(m) = &cache.lstm.mask {
            for (g, k) in dh.iter_mut().zip(m) {
                *g *= k;
            }
        }

        let want_dx = self.net.conv.is_some();
        let dxs = lstm.backward_sequence(&cache.lstm, &dh, &mut grads.lstm, want_dx);
        if let (Some(conv), Some(pre), Some(dxs), Some(gconv)) = (&self.net.conv, &cache.conv_pre, dxs, grads.conv.as_mut()) {
            conv.backward_flat(&cache.input, pre, &dxs, gconv);
        }
        Ok(())
    }

    /// Most probable class (lowest index on ties) and the class probabilities.
    pub fn predict(&self, window: &FeatureWindow<'_>) -> Result<(usize, Vec<f64>)> {
        self.prepare().predict(window)
    }

    /// Number of steps the LSTM consumes for a window of `len` frames.
    pub fn lstm_steps(&self, len: usize) -> usize {
        match &self.net.conv {
            None => len,
            Some(c) => super::conv::conv_output_len(len, c.kernel_len, c.stride),
        }
    }
}

/// A model with its weights regrouped for fast forward passes. Borrowing the
/// model keeps the packed copy in step with the parameters.
pub struct Prepared<'a> {
    model: &'a Model,
    conv: Option<Vec<f64>>,
    lstm: PackedGates,
}

impl Prepared<'_> {
    pub fn forward(&self, window: &FeatureWindow<'_>, mode: Mode<'_>) -> Result<(Vec<f64>, ForwardCache)> {
        let mask = match mode {
            Mode::Training { dropout_rate, rng } if dropout_rate > 0.0 => {
                Some(dropout_mask(rng, self.model.net.lstm.hidden_dim, dropout_rate))
            }
            _ => None,
        };
        self.forward_with_mask(window, mask)
    }

    /// Forward pass with an explicit dropout mask on the final hidden output.
    pub fn forward_with_mask(&self, window: &FeatureWindow<'_>, mask: Option<Vec<f64>>) -> Result<(Vec<f64>, ForwardCache)> {
        let m = self.model;
        m.check_window(window)?;
        if let Some(mk) = &mask {
            if mk.len() != m.net.lstm.hidden_dim {
                return Err(Error::shape("forward", format!("mask len {}", mk.len()), m.net.lstm.hidden_dim));
            }
        }
        let input = m.feature_stats.normalize(window.data);
        let (conv_pre, lstm_cache) = match (&m.net.conv, &self.conv) {
            (Some(c), Some(packed)) => {
                let pre = c.preactivations_packed(packed, &input);
                let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
                let cache = m.net.lstm.forward_packed(&self.lstm, &act, mask);
                (Some(pre), cache)
            }
            _ => (None, m.net.lstm.forward_packed(&self.lstm, &input, mask)),
        };
        let mut head_in = lstm_cache.last_hidden().to_vec();
        if let Some(mk) = &lstm_cache.mask {
            for (h, k) in head_in.iter_mut().zip(mk) {
                *h *= k;
            }
        }
        let logits = m.net.head.forward(&head_in);
        let probs = softmax_slice(&logits)?;
        Ok((
            probs.clone(),
            ForwardCache {
                window_len: window.len(),
                input,
                conv_pre,
                lstm: lstm_cache,
                head_in,
                probs,
            },
        ))
    }

    /// Most probable class (lowest index on ties) and the class probabilities.
    pub fn predict(&self, window: &FeatureWindow<'_>) -> Result<(usize, Vec<f64>)> {
        let m = self.model;
        m.check_window(window)?;
        let input = m.feature_stats.normalize(window.data);
        let h = match (&m.net.conv, &self.conv) {
            (Some(c), Some(packed)) => {
                let act: Vec<f64> = c.preactivations_packed(packed, &input).iter().map(|&z| z.max(0.0)).collect();
                m.net.lstm.last_hidden_packed(&self.lstm, &act)
            }
            _ => m.net.lstm.last_hidden_packed(&self.lstm, &input),
        };
        let probs = softmax_slice(&m.net.head.forward(&h))?;
        Ok((argmax(&probs), probs))
    }

    /// [`Self::predict`] for every window of `set`, in set order. Conv outputs
    /// and LSTM input projections are computed once per frame and shared by
    /// the overlapping windows; the results are bitwise the same.
    pub fn predict_set(&self, set: &WindowSet) -> Result<Vec<(usize, Vec<f64>)>> {
        let m = self.model;
        if set.is_empty() {
            return Ok(Vec::new());
        }
        m.check_window(&set.get(0))?;
        let lstm = &m.net.lstm;
        let width = 4 * lstm.hidden_dim;
        let lookback = set.lookback();
        let (steps, stride) = match &m.net.conv {
            Some(c) => (m.lstm_steps(lookback), c.stride),
            None => (lookback, 1),
        };
        let mut out = Vec::with_capacity(set.len());
        for frames in set.blocks() {
            let input = m.feature_stats.normalize(frames);
            let proj = match (&m.net.conv, &self.conv) {
                (Some(c), Some(packed)) => {
                    let act: Vec<f64> = c.preactivations_strided(packed, &input, 1).iter().map(|&z| z.max(0.0)).collect();
                    lstm.input_projections(&self.lstm, &act)
                }
                _ => lstm.input_projections(&self.lstm, &input),
            };
            let n_frames = frames.len() / set.dim();
            for start in 0..(n_frames + 1).saturating_sub(lookback) {
                let rows = (0..steps).map(|k| {
                    let r = start + k * stride;
                    &proj[r * width..(r + 1) * width]
                });
                let h = lstm.last_hidden_projected(&self.lstm, rows);
                let probs = softmax_slice(&m.net.head.forward(&h))?;
                out.push((argmax(&probs), probs));
            }
        }
        Ok(out)
    }
}

/// Categorical cross-entropy with probabilities clamped to at least `1e-12`.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::shape("cross_entropy", probs.len(), target.len()));
    }
    Ok(-probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| if t == 0.0 { 0.0 } else { t * p.max(1e-12).ln() })
        .sum::<f64>())
}
