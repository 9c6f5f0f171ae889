use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PreprocessSpec;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::network::{ModelConfig, SlmConfig, StageMask};
use crate::optim::AdamConfig;

pub const DEFAULT_A: f64 = 0.1477;
pub const DEFAULT_BATCH_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    ReferenceTiny,
    /// A pretrained backbone supplied by library code through the `Backbone`
    /// trait. Not constructible from a config file.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(flatten)]
    pub adam: AdamConfig,
    /// Rescales each averaged batch gradient to at most this global L2
    /// norm. Off by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            adam: AdamConfig::default(),
            max_grad_norm: None,
        }
    }
}

/// Which entries a run trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSubset {
    /// Training half of split `k`.
    Split(usize),
    /// Every manifest entry.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub num_repeats: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_subset")]
    pub train_on: TrainSubset,
}

fn default_repeats() -> usize {
    crate::data::splits::DEFAULT_REPEATS
}
fn default_fraction() -> f64 {
    crate::data::splits::DEFAULT_TRAIN_FRACTION
}
fn default_subset() -> TrainSubset {
    TrainSubset::Split(0)
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            seed: 0,
            num_repeats: default_repeats(),
            train_fraction: default_fraction(),
            train_on: default_subset(),
        }
    }
}

/// Everything a run depends on. `epochs` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    #[serde(default = "default_backbone")]
    pub backbone: BackboneKind,
    #[serde(default)]
    pub slm: SlmConfig,
    #[serde(default)]
    pub stages: StageMask,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub split: SplitParams,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_backbone() -> BackboneKind {
    BackboneKind::ReferenceTiny
}
fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_a() -> f64 {
    DEFAULT_A
}

impl RunConfig {
    pub fn new(manifest_path: impl Into<PathBuf>, epochs: usize) -> Self {
        RunConfig {
            manifest_path: manifest_path.into(),
            backbone: default_backbone(),
            slm: SlmConfig::default(),
            stages: StageMask::default(),
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: DEFAULT_BATCH_SIZE,
            epochs,
            split: SplitParams::default(),
            a: DEFAULT_A,
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serialises");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config()?.validate()?;
        self.optimizer.adam.validate()?;
        if let Some(c) = self.optimizer.max_grad_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("max_grad_norm must be positive, got {c}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Config(format!("a must be positive, got {}", self.a)));
        }
        Ok(())
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        match self.backbone {
            BackboneKind::ReferenceTiny => Ok(ModelConfig {
                slm: self.slm,
                stages: self.stages,
                ..ModelConfig::reference_tiny()
            }),
            BackboneKind::External => Err(Error::Config(
                "no external backbone weights are bundled; attach one through the Backbone trait \
                 from library code, or use backbone = reference_tiny"
                    .into(),
            )),
        }
    }

    pub fn preprocess_spec(&self) -> PreprocessSpec {
        PreprocessSpec::reference()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_required_epochs() {
        let cfg: RunConfig = serde_json::from_str(r#"{"manifest_path":"m.jsonl","epochs":3}"#).unwrap();
        assert_eq!(cfg.optimizer.adam.lr, 1e-5);
        assert_eq!(cfg.batch_size, 8);
        assert_eq!(cfg.a, 0.1477);
        assert_eq!(cfg.split.num_repeats, 10);
        assert_eq!(cfg.weights, LossWeights::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"manifest_path":"m.jsonl"}"#).is_err());
        assert_eq!(cfg.optimizer.max_grad_norm, None);
        let clipped: RunConfig = serde_json::from_str(
            r#"{"manifest_path":"m.jsonl","epochs":3,"optimizer":{"kind":"adam","lr":0.002,"max_grad_norm":100.0}}"#,
        )
        .unwrap();
        assert_eq!(clipped.optimizer.max_grad_norm, Some(100.0));
        let mut bad = clipped.clone();
        bad.optimizer.max_grad_norm = Some(0.0);
        assert!(bad.validate().is_err());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_memory_settings_rejected() {
        let mut cfg = RunConfig::new("m.jsonl", 1);
        cfg.slm.lambda_mix = 1.0;
        cfg.slm.enable_direct_pathway = false;
        cfg.slm.enable_indirect_pathway = false;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = RunConfig::new("m.jsonl", 1);
        cfg.backbone = BackboneKind::External;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
