//! Online recognition of collective flock activity from per-animal
//! trajectories.
//!
//! The crate covers the whole path from raw position streams to labels:
//! [`pipeline`] turns trajectories into windowed speed and
//! distance-to-centroid features, [`nn`] holds the LSTM and CNN+LSTM
//! classifiers with their training loop, [`eval`] tallies accuracy and
//! confusion matrices, [`stream`] predicts online from a rolling buffer, and
//! [`sim`] generates seeded synthetic flocks in the three activity regimes.

pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod session;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
