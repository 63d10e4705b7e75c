//! Optional TOML run configuration. Every key is optional; command-line
//! flags override file values, which override built-in defaults.
//!
//! ```toml
//! seed = 7
//!
//! [simulate]
//! n_animals = 36
//! steps = 20000
//! split = "train"            # picks the label shares of that day
//! arena = [300.0, 200.0]
//! noise_std = 0.02
//! start_time = 0
//! schedule = [[600, "not_active"], [120, "herd"], [1800, "active"]]
//!
//! [simulate.regimes.herd]
//! mean_speed = 1.2
//!
//! [preprocess]
//! max_gap = 60
//!
//! [train]
//! kind = "cnn_lstm"
//! features = "both"
//! velocity_encoding = "speed"
//! epochs = 50
//! lookback = 30
//!
//! [export]
//! max_frames = 100000
//! max_gap = 60
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use flockact::nn::{ModelKind, TrainConfig};
use flockact::pipeline::{ActivityLabel, FeatureSet, Split, VelocityEncoding};
use flockact::sim::{RegimeParams, Regimes};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub export: ExportSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_animals: Option<usize>,
    pub steps: Option<u64>,
    pub split: Option<Split>,
    pub arena: Option<(f64, f64)>,
    pub noise_std: Option<f64>,
    pub start_time: Option<i64>,
    pub schedule: Option<Vec<(u64, ActivityLabel)>>,
    #[serde(default)]
    pub regimes: RegimesSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimesSection {
    pub not_active: Option<RegimeOverride>,
    pub active: Option<RegimeOverride>,
    pub herd: Option<RegimeOverride>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeOverride {
    pub mean_speed: Option<f64>,
    pub speed_std: Option<f64>,
    pub cohesion_radius: Option<f64>,
    pub alignment_weight: Option<f64>,
    pub cohesion_weight: Option<f64>,
    pub repulsion_weight: Option<f64>,
    pub corridor_width: Option<f64>,
}

impl RegimeOverride {
    fn apply(&self, p: &mut RegimeParams) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.mean_speed, self.mean_speed);
        set(&mut p.speed_std, self.speed_std);
        set(&mut p.cohesion_radius, self.cohesion_radius);
        set(&mut p.alignment_weight, self.alignment_weight);
        set(&mut p.cohesion_weight, self.cohesion_weight);
        set(&mut p.repulsion_weight, self.repulsion_weight);
        set(&mut p.corridor_width, self.corridor_width);
    }
}

impl RegimesSection {
    pub fn apply(&self, regimes: &mut Regimes) {
        let parts = [
            (ActivityLabel::NotActive, &self.not_active),
            (ActivityLabel::Active, &self.active),
            (ActivityLabel::HerdMovement, &self.herd),
        ];
        for (label, o) in parts {
            if let Some(o) = o {
                o.apply(regimes.get_mut(label));
            }
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    pub max_gap: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub kind: Option<ModelKind>,
    pub features: Option<FeatureSet>,
    pub velocity_encoding: Option<VelocityEncoding>,
    pub learning_rate: Option<f64>,
    pub lookback: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub n_filters: Option<usize>,
    pub kernel_len: Option<usize>,
    pub stride: Option<usize>,
    pub peepholes: Option<bool>,
}

impl TrainSection {
    /// Overlay the file values on `cfg`.
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    cfg.$field = v;
                })*
            };
        }
        overlay!(
            learning_rate,
            lookback,
            hidden_dim,
            batch_size,
            epochs,
            dropout_rate,
            adam_beta1,
            adam_beta2,
            adam_eps,
            n_filters,
            kernel_len,
            stride,
            peepholes
        );
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    pub max_frames: Option<usize>,
    pub max_gap: Option<i64>,
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    Ok(toml::from_str(text)?)
}

pub fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}
