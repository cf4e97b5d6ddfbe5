//! Checkpoints: a json manifest next to a binary blob of little-endian
//! `f64` parameters (models in manifest order, each layer's weights
//! row-major then bias).

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer, HeadKind, ModelParams};
use crate::{canonical, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: HeadKind,
    /// Layer widths, input first.
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl ModelDescriptor {
    pub fn of(model: &ModelParams) -> Self {
        let mut dims = vec![model.input_dim()];
        dims.extend(model.layers.iter().map(DenseLayer::output_dim));
        Self {
            kind: model.kind,
            dims,
            activations: model.layers.iter().map(|l| l.activation).collect(),
        }
    }

    fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub models: Vec<ModelDescriptor>,
    pub seed: u64,
    pub step: u64,
    /// Training-specific metadata (config, final losses, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
    /// File name of the parameter blob, relative to the manifest.
    pub blob: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub models: Vec<ModelParams>,
}

impl Checkpoint {
    pub fn new(models: Vec<ModelParams>, seed: u64, step: u64, extra: serde_json::Value) -> Self {
        Self {
            manifest: CheckpointManifest {
                models: models.iter().map(ModelDescriptor::of).collect(),
                seed,
                step,
                extra,
                blob: String::new(),
            },
            models,
        }
    }

    pub fn model(&self, kind: HeadKind) -> Option<&ModelParams> {
        self.models.iter().find(|m| m.kind == kind)
    }
}

fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("params.bin")
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let blob = blob_path(path);
    let mut manifest = ckpt.manifest.clone();
    manifest.models = ckpt.models.iter().map(ModelDescriptor::of).collect();
    manifest.blob = blob
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut bytes = Vec::new();
    for m in &ckpt.models {
        for v in m.flatten() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
    canonical::write_file(path, &manifest)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let blob = path.with_file_name(&manifest.blob);
    let bytes = std::fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    let expected: usize = manifest.models.iter().map(ModelDescriptor::n_params).sum();
    if bytes.len() != expected * 8 {
        return Err(Error::malformed(
            blob.display().to_string(),
            format!("expected {} bytes of parameters, found {}", expected * 8, bytes.len()),
        ));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut models = Vec::new();
    for d in &manifest.models {
        if d.dims.len() != d.activations.len() + 1 {
            return Err(Error::malformed(path.display().to_string(), "dims/activations length"));
        }
        let layers = d
            .dims
            .windows(2)
            .zip(&d.activations)
            .map(|(w, &activation)| {
                let weights =
                    Array2::from_shape_fn((w[1], w[0]), |_| values.next().expect("sized blob"));
                let bias = Array1::from_shape_fn(w[1], |_| values.next().expect("sized blob"));
                DenseLayer {
                    weights,
                    bias,
                    activation,
                }
            })
            .collect();
        let model = ModelParams { kind: d.kind, layers };
        model.validate()?;
        models.push(model);
    }
    Ok(Checkpoint { manifest, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let trunk = ModelParams::init(HeadKind::Trunk, &[4, 6, 6], &[Activation::Relu, Activation::Relu], 1);
        let head = ModelParams::init(HeadKind::Contrastive, &[6, 4, 8], &[Activation::Relu, Activation::Tanh], 2);
        let ckpt = Checkpoint::new(vec![trunk, head], 7, 42, serde_json::json!({"loss": 0.5}));
        save_checkpoint(&ckpt, &path).unwrap();
        assert!(dir.path().join("ckpt.params.bin").exists());
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.models, ckpt.models);
        assert_eq!(back.manifest.step, 42);
        assert_eq!(back.manifest.blob, "ckpt.params.bin");
        assert!(back.model(HeadKind::Contrastive).is_some());
        assert!(back.model(HeadKind::SpeakerCls).is_none());
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let trunk = ModelParams::init(HeadKind::Trunk, &[2, 2], &[Activation::Relu], 1);
        save_checkpoint(&Checkpoint::new(vec![trunk], 0, 0, serde_json::Value::Null), &path).unwrap();
        let blob = dir.path().join("c.params.bin");
        let bytes = std::fs::read(&blob).unwrap();
        std::fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
