//! Intra-speaker clustering of speaker embeddings and cluster-driven
//! contrastive pretraining for speech emotion recognition.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: embedding corpora (jsonl/binary IO, normalisation, capping, synthesis)
//! - [`clustering`]: per-speaker k-means
//! - [`metrics`]: NMI, ARI, purity and silhouette against emotion labels
//! - [`pair_miner`]: anchor/positive/negative tuples from intra-speaker clusters
//! - [`nn`]: dense layers, gradient reversal, AdamW, finite-difference checks
//! - [`objectives`]: contrastive, cross-entropy and multi-task losses
//! - [`trainer`]: pretraining, emotion fine-tuning and UAR evaluation
//! - [`projection`]: 2D PCA export for scatter plots

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod clustering;
pub mod corpus;
mod error;
pub mod metrics;
pub mod nn;
pub mod objectives;
pub mod pair_miner;
pub mod projection;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
