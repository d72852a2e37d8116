//! Trainable node classifier over a [`FilterBank`](crate::filterbank::FilterBank).

pub mod ablate;
pub mod config;
pub mod network;
pub mod params;
pub mod train;

pub use ablate::{ablate, run_splits, run_splits_summary, summarize, AblationRow, AblationTable, Summary, ABLATION_COMBINATIONS};
pub use config::{Activation, Components, ModelConfig, Variant};
pub use network::{accuracy, evaluate, free_eigenvalues_forward, loss_and_grads, softmax_cross_entropy, Adam, ForwardCache, Model};
pub use params::{load_checkpoint, save_checkpoint, Checkpoint, Params, Shapes};
pub use train::{build_bank, train, train_full, train_on_bank, train_with_spectrum, TrainReport, Trained};
