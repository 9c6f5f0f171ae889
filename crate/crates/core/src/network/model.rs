use std::sync::Arc;

use ndarray::{Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backbone::{Backbone, BackboneContract, ReferenceBackbone};
use super::memory::{head_forward, init_head_params, prediction_from, HeadOutputs};
use super::{FeatureBundle, Image, QualityPrediction, SlmConfig};
use crate::autograd::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::rating_stats::QualityScale;

/// Which backbone stages contribute to the fused vector. Excluded stages
/// contribute zeros to their slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMask(pub [bool; 3]);

impl Default for StageMask {
    fn default() -> Self {
        StageMask([true; 3])
    }
}

impl StageMask {
    /// The seven non-empty stage subsets, in binary order of `(s1, s2, s3)`.
    pub fn all_subsets() -> Vec<StageMask> {
        (1u8..8)
            .map(|bits| StageMask([bits & 4 != 0, bits & 2 != 0, bits & 1 != 0]))
            .collect()
    }

    pub fn label(&self) -> String {
        let names: Vec<_> = (0..3).filter(|&i| self.0[i]).map(|i| (i + 1).to_string()).collect();
        format!("stages[{}]", names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: BackboneContract,
    pub slm: SlmConfig,
    #[serde(default)]
    pub stages: StageMask,
}

impl ModelConfig {
    /// Reference tiny backbone with a narrow memory block, for desk-scale runs.
    pub fn reference_tiny() -> Self {
        ModelConfig {
            backbone: BackboneContract::reference_tiny(),
            slm: SlmConfig {
                hidden_channels: 32,
                ..SlmConfig::default()
            },
            stages: StageMask::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.slm.validate()?;
        if !self.stages.0.iter().any(|s| *s) {
            return Err(Error::Config("at least one backbone stage must be enabled".into()));
        }
        Ok(())
    }
}

/// Backbone, memory block and head with their parameters.
#[derive(Clone)]
pub struct QualityModel {
    config: ModelConfig,
    scale: QualityScale,
    backbone: Arc<dyn Backbone>,
    pub params: ParamStore,
}

impl std::fmt::Debug for QualityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QualityModel")
            .field("config", &self.config)
            .field("backbone", &self.backbone.identity())
            .field("params", &self.params.num_scalars())
            .finish()
    }
}

impl QualityModel {
    /// Model on the reference backbone, initialised from `seed`.
    pub fn new(config: ModelConfig, scale: QualityScale, seed: u64) -> Result<Self> {
        let backbone = Arc::new(ReferenceBackbone::new(config.backbone.clone())?);
        Self::with_backbone(config, scale, backbone, seed)
    }

    pub fn with_backbone(
        config: ModelConfig,
        scale: QualityScale,
        backbone: Arc<dyn Backbone>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if backbone.contract() != &config.backbone {
            return Err(Error::Config(
                "backbone contract differs from the model configuration".into(),
            ));
        }
        if scale.num_levels() != config.slm.num_levels {
            return Err(Error::Config(format!(
                "scale has {} levels, configuration expects {}",
                scale.num_levels(),
                config.slm.num_levels
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        backbone.init_params(&mut params, &mut rng);
        init_head_params(&mut params, config.backbone.fused_len(), &config.slm, &mut rng);
        Ok(QualityModel {
            config,
            scale,
            backbone,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scale(&self) -> &QualityScale {
        &self.scale
    }

    pub fn backbone(&self) -> &dyn Backbone {
        self.backbone.as_ref()
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.config.backbone.input_size
    }

    /// Builds the fused `1 × D` row on `g`, honouring the stage mask.
    pub fn fused_on_graph(&self, g: &mut Graph<'_>, image: &Image) -> Result<Var> {
        let taps = backbone_taps(g, self.backbone.as_ref(), image)?;
        let mut parts = Vec::with_capacity(3);
        for (i, tap) in taps.into_iter().enumerate() {
            if self.config.stages.0[i] {
                parts.push(g.mean_rows(tap));
            } else {
                let c = self.config.backbone.stage_channels[i];
                parts.push(g.constant(Array2::zeros((1, c))));
            }
        }
        g.concat_cols(&parts)
    }

    pub fn forward(&self, g: &mut Graph<'_>, image: &Image) -> Result<HeadOutputs> {
        let fused = self.fused_on_graph(g, image)?;
        head_forward(g, fused, &self.config.slm, &self.scale)
    }

    pub fn predict_image(&self, image: &Image) -> Result<QualityPrediction> {
        let mut g = Graph::new(&self.params);
        let out = self.forward(&mut g, image)?;
        prediction_from(&g, &out, &self.scale)
    }

    pub fn features(&self, image: &Image) -> Result<FeatureBundle> {
        extract_features(image, self.backbone.as_ref(), &self.params)
    }
}

fn backbone_taps(g: &mut Graph<'_>, backbone: &dyn Backbone, image: &Image) -> Result<[Var; 3]> {
    let contract = backbone.contract();
    let (h, w) = contract.input_size;
    if image.dim() != (h, w, 3) {
        return Err(Error::Shape(format!(
            "image is {:?}, backbone expects ({h}, {w}, 3)",
            image.dim()
        )));
    }
    let tokens = image
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((h * w, 3))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let x = g.constant(tokens);
    let taps = backbone.forward(g, x)?;
    for (i, tap) in taps.iter().enumerate() {
        let (sh, sw) = contract.stage_spatial[i];
        let expect = (sh * sw, contract.stage_channels[i]);
        if g.shape(*tap) != expect {
            return Err(Error::Shape(format!(
                "stage {} produced {:?}, contract declares {expect:?}",
                i + 1,
                g.shape(*tap)
            )));
        }
    }
    Ok(taps)
}

/// Runs the backbone and pools each stage tap into the fused vector.
pub fn extract_features(
    image: &Image,
    backbone: &dyn Backbone,
    params: &ParamStore,
) -> Result<FeatureBundle> {
    let mut g = Graph::new(params);
    let taps = backbone_taps(&mut g, backbone, image)?;
    let contract = backbone.contract();
    let mut maps = Vec::with_capacity(3);
    let mut fused = Vec::with_capacity(contract.fused_len());
    for (i, tap) in taps.iter().enumerate() {
        let (h, w) = contract.stage_spatial[i];
        let tokens = g.value(*tap);
        let c = tokens.ncols();
        maps.push(Array3::from_shape_fn((c, h, w), |(ch, y, x)| tokens[[y * w + x, ch]]));
        let pooled = g.mean_rows(*tap);
        fused.extend(g.value(pooled).iter().copied());
    }
    let f3 = maps.pop().unwrap();
    let f2 = maps.pop().unwrap();
    let f1 = maps.pop().unwrap();
    Ok(FeatureBundle {
        f1,
        f2,
        f3,
        fused: Array1::from(fused),
    })
}
