//! LSTM and CNN+LSTM classifiers with hand-derived backpropagation.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod conv;
pub mod dense;
pub mod lstm;
pub mod model;
pub mod train;

pub use adam::{adam_step, adam_update, AdamState};
pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint};
pub use config::TrainConfig;
pub use conv::{conv1d_forward, conv_output_len, Conv1dParams};
pub use dense::DenseParams;
pub use lstm::{dropout_mask, lstm_cell_forward, lstm_sequence_forward, LstmParams, LstmState, LstmStepCache};
pub use model::{cross_entropy, FeatureStats, ForwardCache, Mode, Model, ModelKind, Network, Prepared};
pub use train::{accuracy, format_epoch_log, init_model, train, train_with_eval, EpochLog};
