//! The MSTCN voice-category classifier.

mod category;
mod checkpoint;
mod config;
mod network;

pub use category::{decode, Category};
pub use checkpoint::{Checkpoint, TrainingMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{
    param_count, receptive_field, FeaturesMode, ModelConfig, NormMode, OutputActivation,
};
pub use network::{Bound, FeatureMap, Mstcn, Session};
