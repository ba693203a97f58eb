//! Sequence-to-sequence imputation of gaps in time series.
//!
//! A forward encoder reads the observations before a gap, a backward encoder
//! reads those after it, and a two-stream decoder fills the gap. The streams
//! are blended with fixed linear weights that favour whichever side is closer
//! to observed data. The crate also carries the full training and evaluation
//! harness: Adam with early stopping, CSV ingestion and windowing, MAE/MRE
//! scoring and Borda-count ranking.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod lstm;
pub mod model;
pub mod numerics;
pub mod optim;

pub use error::{Error, Result};
