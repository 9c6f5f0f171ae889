//! The three-stage prediction network: backbone taps and fusion, the
//! short-/long-term memory block, and the dual-pathway quality head.

mod backbone;
mod checkpoint;
mod memory;
mod model;

use ndarray::{Array1, Array3};
use serde::{Deserialize, Serialize};

pub use backbone::{Backbone, BackboneContract, ReferenceBackbone, StageMaps};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_FORMAT_VERSION};
pub use memory::{
    head_forward, init_head_params, long_term_memory, predict, short_term_memory, HeadOutputs, LongTermTrace,
    ShortTermOutputs,
};
pub use model::{extract_features, ModelConfig, QualityModel, StageMask};

use crate::error::{Error, Result};
use crate::rating_stats::OpinionDistribution;

/// An `H × W × 3` RGB image with values in `[0, 1]`.
pub type Image = Array3<f64>;

/// Configuration of the memory block and the quality head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlmConfig {
    /// Number of quality levels `C`.
    pub num_levels: usize,
    /// Feature width `C'` of the memory block.
    pub hidden_channels: usize,
    /// Weight of the memory DOS in the final mixture.
    pub lambda_mix: f64,
    /// Attention features feed the memory features (`M = AF + L`).
    pub enable_direct_pathway: bool,
    /// Long-term memory feeds the memory features.
    pub enable_indirect_pathway: bool,
}

impl Default for SlmConfig {
    fn default() -> Self {
        SlmConfig {
            num_levels: 5,
            hidden_channels: 256,
            lambda_mix: 0.999,
            enable_direct_pathway: true,
            enable_indirect_pathway: true,
        }
    }
}

impl SlmConfig {
    pub fn memory_enabled(&self) -> bool {
        self.enable_direct_pathway || self.enable_indirect_pathway
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_levels < 2 {
            return Err(Error::Config(format!(
                "num_levels must be at least 2, got {}",
                self.num_levels
            )));
        }
        if self.hidden_channels == 0 {
            return Err(Error::Config("hidden_channels must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(Error::Config(format!(
                "lambda_mix must lie in [0, 1], got {}",
                self.lambda_mix
            )));
        }
        if self.lambda_mix == 1.0 && !self.memory_enabled() {
            return Err(Error::Config(
                "lambda_mix = 1 uses only the memory DOS, but both pathways are disabled".into(),
            ));
        }
        Ok(())
    }
}

/// Per-stage feature maps (`C_i × H_i × W_i`) and their pooled concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub f1: Array3<f64>,
    pub f2: Array3<f64>,
    pub f3: Array3<f64>,
    pub fused: Array1<f64>,
}

/// Network output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityPrediction {
    pub d_mem: OpinionDistribution,
    pub d_alg: OpinionDistribution,
    pub d_p: OpinionDistribution,
    pub mos_p: f64,
    pub sos_p: f64,
}
