//! The MFMGCN network: stacked spatio-temporal blocks over a fused graph,
//! a per-node output layer, and the training loop.

mod checkpoint;
mod config;
mod network;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{default_blocks, LrDecayMode, ModelConfig, StBlockConfig, TrainConfig};
pub use network::{
    batch_laplacian, build_model, forward, forward_tape, st_block_forward, temporal_multibranch,
    BlockParams, MfmgcnModel,
};
pub use train::{batch_targets, evaluate_mae, train, EpochRecord, ForecastData, TrainHistory};
