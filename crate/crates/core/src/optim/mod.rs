//! Adam, the mini-batch training loop, and early stopping.

mod adam;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use train::{holdout_tail, mean_loss, train, train_from, EarlyStopPolicy, EpochRecord, TrainConfig, TrainLog};
