//! Minimal dense-network substrate in double precision.

mod checkpoint;
mod gradcheck;
mod layer;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest, ModelDescriptor};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, Stencil};
pub use layer::{
    backward, forward, grl_backward, grl_forward, Activation, DenseLayer, ForwardCache, Gradients,
    HeadKind, LayerGrad, ModelParams,
};
pub use optim::{AdamWConfig, OptimizerState};
