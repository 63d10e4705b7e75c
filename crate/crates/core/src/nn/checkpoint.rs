//! Versioned JSON checkpoints.
//!
//! ```json
//! {
//!   "format": "flockact-checkpoint",
//!   "format_version": 1,
//!   "model": {
//!     "kind": "lstm" | "cnn_lstm",
//!     "net": {
//!       "conv": null | { "kernels": [Matrix], "biases": [..], "kernel_len", "stride", "n_filters", "in_channels" },
//!       "lstm": { "input_dim", "hidden_dim", "peepholes", "w_xi": Matrix, ..., "b_o": [..] },
//!       "head": { "w": Matrix, "b": [..] }
//!     },
//!     "feature_stats": { "mean": [..], "std": [..] },
//!     "n_classes", "features": { "set", "velocity" }, "n_animals", "lookback"
//!   }
//! }
//! ```
//!
//! A `Matrix` is `{ "rows", "cols", "data": [row-major values] }`. Reals are
//! written in shortest round-trip form, so save→load is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CHECKPOINT_FORMAT: &str = "flockact-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    format_version: u32,
    model: Model,
}

pub fn checkpoint_to_string(model: &Model) -> Result<String> {
    model.validate()?;
    let doc = CheckpointDoc {
        format: CHECKPOINT_FORMAT.into(),
        format_version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::CheckpointParse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn checkpoint_from_str(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CheckpointParse(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(Error::CheckpointParse(format!("missing `format: {CHECKPOINT_FORMAT}`")));
    }
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CheckpointParse("missing format_version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::CheckpointVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let doc: CheckpointDoc = serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("matrix data length") {
            Error::CheckpointDims(msg)
        } else {
            Error::CheckpointParse(msg)
        }
    })?;
    doc.model.validate().map_err(|e| Error::CheckpointDims(e.to_string()))?;
    Ok(doc.model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    write_atomic(path, checkpoint_to_string(model)?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}
