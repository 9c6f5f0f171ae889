//! Checkpoints: a safetensors archive of every parameter keyed by its dotted
//! name, plus a JSON sidecar (`<archive>.json`) with the configuration.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, QualityModel};
use crate::error::{Error, Result};
use crate::rating_stats::QualityScale;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub backbone_identity: String,
    pub model: ModelConfig,
    pub scale: QualityScale,
}

pub fn sidecar_path(archive: &Path) -> PathBuf {
    let mut s = archive.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint(model: &QualityModel, path: &Path) -> Result<()> {
    let bytes: Vec<(String, Vec<u8>, Vec<usize>)> = model
        .params
        .iter()
        .map(|(name, t)| {
            let data = t.iter().flat_map(|v| v.to_le_bytes()).collect();
            (name.clone(), data, t.shape().to_vec())
        })
        .collect();
    let views = bytes
        .iter()
        .map(|(name, data, shape)| {
            TensorView::new(Dtype::F64, shape.clone(), data)
                .map(|v| (name.clone(), v))
                .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let archive = safetensors::tensor::serialize(views, &None)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, archive).map_err(|e| Error::io(path, e))?;

    let meta = CheckpointMeta {
        format_version: CHECKPOINT_FORMAT_VERSION,
        backbone_identity: model.backbone().identity(),
        model: model.config().clone(),
        scale: model.scale().clone(),
    };
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
}

pub fn read_meta(path: &Path) -> Result<CheckpointMeta> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", sidecar.display())))
}

/// Loads a checkpoint on the reference backbone. When `expected` is given the
/// stored configuration must equal it. Every tensor must match the shape the
/// configuration implies; nothing is reshaped.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<QualityModel> {
    let meta = read_meta(path)?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    if let Some(cfg) = expected {
        if cfg != &meta.model {
            return Err(Error::Config(format!(
                "checkpoint configuration differs from the requested one: stored {:?}, requested {:?}",
                meta.model, cfg
            )));
        }
    }
    let mut model = QualityModel::new(meta.model.clone(), meta.scale.clone(), 0)?;
    if model.backbone().identity() != meta.backbone_identity {
        return Err(Error::Checkpoint(format!(
            "checkpoint was written for backbone {:?}, cannot rebuild it (have {:?})",
            meta.backbone_identity,
            model.backbone().identity()
        )));
    }

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let archive = SafeTensors::deserialize(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let stored: HashMap<String, TensorView<'_>> = archive.tensors().into_iter().collect();
    if stored.len() != model.params.len() {
        return Err(Error::Checkpoint(format!(
            "archive holds {} tensors, configuration defines {}",
            stored.len(),
            model.params.len()
        )));
    }
    for (name, slot) in model.params.iter_mut() {
        let view = stored
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if view.dtype() != Dtype::F64 || view.shape() != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: stored {:?} {:?}, expected F64 {:?}",
                view.dtype(),
                view.shape(),
                slot.shape()
            )));
        }
        let values: Vec<f64> = view
            .data()
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *slot = Array2::from_shape_vec(slot.dim(), values)
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SlmConfig;

    #[test]
    fn round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt/model.safetensors");
        let cfg = ModelConfig::reference_tiny();
        let model = QualityModel::new(cfg.clone(), QualityScale::five_point(), 17).unwrap();
        save_checkpoint(&model, &path).unwrap();
        assert!(sidecar_path(&path).exists());

        let loaded = load_checkpoint(&path, Some(&cfg)).unwrap();
        assert_eq!(loaded.params, model.params);

        let other = ModelConfig {
            slm: SlmConfig {
                hidden_channels: 16,
                ..cfg.slm.clone()
            },
            ..cfg.clone()
        };
        assert!(matches!(load_checkpoint(&path, Some(&other)), Err(Error::Config(_))));

        // Tamper with the sidecar so shapes no longer agree with the archive.
        let mut meta = read_meta(&path).unwrap();
        meta.model.slm.hidden_channels = 16;
        fs::write(sidecar_path(&path), serde_json::to_string(&meta).unwrap()).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::Checkpoint(_))));
    }
}
