//! The imputation network: a forward encoder over the observations before a
//! gap, a backward encoder over those after it (read in reverse), and two
//! self-feeding decoder streams whose hidden outputs are scaled by a linear
//! proximity schedule and merged into the final prediction.

mod checkpoint;
mod network;
mod params;
mod schedule;
mod window;

#[cfg(test)]
mod tests;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use network::{
    backward, backward_from_outputs, forward, impute, loss, loss_terms, window_loss, ForwardTrace, Gradients,
    OutputGrads,
};
pub use params::{Affine, MergeLayer, ModelConfig, ModelParams, Topology};
pub use schedule::{ScalingSchedule, ScheduleVariant};
pub use window::ImputationWindow;
