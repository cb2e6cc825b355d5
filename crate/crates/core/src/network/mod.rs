//! K-to-1 network: stage-1 segmentation modules, one per sub-map, feeding
//! an integration module, trained end to end under the composite loss.

mod checkpoint;
mod model;
mod predict;
mod spec;
mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use model::{argmax_channels, CompositeVars, ForwardOutput, ForwardVars, KTo1Model, LossBreakdown};
pub use predict::predict;
pub use spec::{KTo1Spec, SegModuleSpec};
pub use train::{
    fit, train_step, BatchObjective, LogRow, LrSchedule, RngState, StepStats, TrainConfig, TrainItem, Trainer,
};
