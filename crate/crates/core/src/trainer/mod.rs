//! Pretraining, emotion fine-tuning and evaluation.

mod config;
pub mod gradcheck;
mod network;
mod pretrain;
mod protocol;
mod ser;

pub use config::{ArchConfig, Mode, TrainConfig};
pub use network::{
    average_pool, classification_gradients, predict, tuple_batch_gradients, BatchLoss, ContrastiveSettings, Network,
    NetworkGrads, TupleBatch,
};
pub use pretrain::{pretrain, pretraining_clusters, PretrainOutcome, PretrainSummary, Pretrainer};
pub use protocol::{run_protocol, ProtocolConfig, ProtocolReport, ProtocolRow, SeedResult};
pub use ser::{
    evaluate_uar, subsample_labels, train_ser, uar_from_confusion, EvalResult, SerModel, SerOutcome, SerSplits,
    SplitFractions,
};
