use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training and architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Look-back window length `m`.
    pub lookback: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Convolution filters (CNN+LSTM only).
    pub n_filters: usize,
    pub kernel_len: usize,
    pub stride: usize,
    pub peepholes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            lookback: 30,
            hidden_dim: 30,
            batch_size: 10,
            epochs: 50,
            dropout_rate: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            n_filters: 32,
            kernel_len: 2,
            stride: 1,
            peepholes: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("lookback", self.lookback),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("n_filters", self.n_filters),
            ("kernel_len", self.kernel_len),
            ("stride", self.stride),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must be in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be > 0".into()));
        }
        Ok(())
    }
}
