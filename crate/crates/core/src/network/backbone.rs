use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{ConvGeometry, Graph, ParamStore, Var};
use crate::error::{Error, Result};

/// Shapes a backbone promises for a fixed input resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneContract {
    /// Input `(height, width)`.
    pub input_size: (usize, usize),
    pub stage_channels: [usize; 3],
    pub stage_spatial: [(usize, usize); 3],
}

impl BackboneContract {
    /// Three-stage convolutional transformer taps at 384×384.
    pub fn cvt_default() -> Self {
        BackboneContract {
            input_size: (384, 384),
            stage_channels: [64, 192, 384],
            stage_spatial: [(96, 96), (48, 48), (24, 24)],
        }
    }

    /// The desk-scale reference backbone at 64×64.
    pub fn reference_tiny() -> Self {
        BackboneContract {
            input_size: (64, 64),
            stage_channels: [16, 32, 64],
            stage_spatial: [(16, 16), (8, 8), (4, 4)],
        }
    }

    pub fn fused_len(&self) -> usize {
        self.stage_channels.iter().sum()
    }

    /// Offsets of each stage's slice inside the fused vector.
    pub fn fused_ranges(&self) -> [std::ops::Range<usize>; 3] {
        let [c1, c2, c3] = self.stage_channels;
        [0..c1, c1..c1 + c2, c1 + c2..c1 + c2 + c3]
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.stage_channels;
        let sp = self.stage_spatial;
        if c.contains(&0) || !(c[0] < c[1] && c[1] < c[2]) {
            return Err(Error::Config(format!(
                "stage channels must be positive and strictly increasing: {c:?}"
            )));
        }
        if !(sp[0].0 > sp[1].0 && sp[1].0 > sp[2].0 && sp[0].1 > sp[1].1 && sp[1].1 > sp[2].1)
            || sp[2].0 == 0
            || sp[2].1 == 0
        {
            return Err(Error::Config(format!(
                "stage spatial sizes must be strictly decreasing: {sp:?}"
            )));
        }
        Ok(())
    }
}

/// Per-stage token maps on a graph, each `(H_i·W_i) × C_i` in row-major
/// spatial order.
pub type StageMaps = [Var; 3];

/// A feature extractor exposing three stage taps.
///
/// Implementations own their parameter names (conventionally under
/// `backbone.`) inside the model's [`ParamStore`].
pub trait Backbone: Send + Sync {
    fn contract(&self) -> &BackboneContract;

    /// Stable identity string recorded in checkpoints.
    fn identity(&self) -> String;

    fn init_params(&self, store: &mut ParamStore, rng: &mut dyn rand::RngCore);

    /// `image` is an `(H·W) × 3` token map at the contract's input size.
    fn forward(&self, graph: &mut Graph<'_>, image: Var) -> Result<StageMaps>;
}

/// Three stages of strided patch convolution, ReLU and a residual
/// single-head self-attention block.
#[derive(Debug, Clone)]
pub struct ReferenceBackbone {
    contract: BackboneContract,
    strides: [usize; 3],
}

impl ReferenceBackbone {
    pub fn new(contract: BackboneContract) -> Result<Self> {
        contract.validate()?;
        let mut strides = [0; 3];
        let mut prev = contract.input_size;
        for (i, &(h, w)) in contract.stage_spatial.iter().enumerate() {
            if h == 0 || prev.0 % h != 0 || prev.1 % w != 0 || prev.0 / h != prev.1 / w {
                return Err(Error::Config(format!(
                    "stage {} size {h}x{w} is not an integer downsampling of {}x{}",
                    i + 1,
                    prev.0,
                    prev.1
                )));
            }
            strides[i] = prev.0 / h;
            prev = (h, w);
        }
        Ok(ReferenceBackbone { contract, strides })
    }

    pub fn tiny() -> Self {
        Self::new(BackboneContract::reference_tiny()).expect("static contract is valid")
    }

    fn stage_in_channels(&self, stage: usize) -> usize {
        if stage == 0 {
            3
        } else {
            self.contract.stage_channels[stage - 1]
        }
    }
}

fn stage_name(stage: usize, leaf: &str) -> String {
    format!("backbone.stage{}.{leaf}", stage + 1)
}

impl Backbone for ReferenceBackbone {
    fn contract(&self) -> &BackboneContract {
        &self.contract
    }

    fn identity(&self) -> String {
        let c = self.contract.stage_channels;
        let (h, w) = self.contract.input_size;
        format!("reference-conv-attn/{}-{}-{}@{h}x{w}", c[0], c[1], c[2])
    }

    fn init_params(&self, store: &mut ParamStore, rng: &mut dyn rand::RngCore) {
        for stage in 0..3 {
            let cin = self.stage_in_channels(stage);
            let cout = self.contract.stage_channels[stage];
            let k = self.strides[stage];
            let fan_in = k * k * cin;
            // Kaiming-style bound for the ReLU that follows the embedding.
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, cout), |_| rng.random_range(-bound..bound));
            store.insert(stage_name(stage, "embed.weight"), w);
            store.init_zeros(&stage_name(stage, "embed.bias"), 1, cout);
            let mut rng = &mut *rng;
            for proj in ["attn.q.weight", "attn.k.weight", "attn.v.weight", "attn.out.weight"] {
                store.init_linear(&stage_name(stage, proj), cout, cout, &mut rng);
            }
            store.init_zeros(&stage_name(stage, "attn.out.bias"), 1, cout);
        }
    }

    fn forward(&self, g: &mut Graph<'_>, image: Var) -> Result<StageMaps> {
        let (h0, w0) = self.contract.input_size;
        if g.shape(image) != (h0 * w0, 3) {
            return Err(Error::Shape(format!(
                "backbone expects {h0}x{w0}x3 input, got token map {:?}",
                g.shape(image)
            )));
        }
        let mut x = image;
        let mut size = (h0, w0);
        let mut taps = [image; 3];
        for (stage, tap) in taps.iter_mut().enumerate() {
            let geom = ConvGeometry {
                height: size.0,
                width: size.1,
                channels: self.stage_in_channels(stage),
                kernel: self.strides[stage],
                stride: self.strides[stage],
            };
            let patches = g.im2col(x, geom)?;
            let w = g.param(&stage_name(stage, "embed.weight"))?;
            let b = g.param(&stage_name(stage, "embed.bias"))?;
            let t = g.matmul(patches, w);
            let t = g.add_row_bias(t, b);
            let t = g.relu(t);
            x = self_attention(g, t, stage)?;
            *tap = x;
            size = self.contract.stage_spatial[stage];
        }
        Ok(taps)
    }
}

/// `x + softmax(Q·Kᵀ/√d)·V·W_o + b_o` over the tokens of one stage.
fn self_attention(g: &mut Graph<'_>, x: Var, stage: usize) -> Result<Var> {
    let d = g.shape(x).1 as f64;
    let wq = g.param(&stage_name(stage, "attn.q.weight"))?;
    let wk = g.param(&stage_name(stage, "attn.k.weight"))?;
    let wv = g.param(&stage_name(stage, "attn.v.weight"))?;
    let wo = g.param(&stage_name(stage, "attn.out.weight"))?;
    let bo = g.param(&stage_name(stage, "attn.out.bias"))?;
    let q = g.matmul(x, wq);
    let k = g.matmul(x, wk);
    let v = g.matmul(x, wv);
    let kt = g.transpose(k);
    let scores = g.matmul(q, kt);
    let scores = g.scale(scores, 1.0 / d.sqrt());
    let attn = g.softmax_rows(scores);
    let mixed = g.matmul(attn, v);
    let out = g.matmul(mixed, wo);
    let out = g.add_row_bias(out, bo);
    Ok(g.add(x, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contracts_are_consistent() {
        let cvt = BackboneContract::cvt_default();
        cvt.validate().unwrap();
        assert_eq!(cvt.fused_len(), 640);
        let tiny = BackboneContract::reference_tiny();
        tiny.validate().unwrap();
        assert_eq!(tiny.fused_len(), 112);
        assert_eq!(ReferenceBackbone::new(cvt).unwrap().strides, [4, 2, 2]);
        assert_eq!(ReferenceBackbone::tiny().strides, [4, 2, 2]);

        let mut bad = BackboneContract::reference_tiny();
        bad.stage_channels = [32, 16, 64];
        assert!(bad.validate().is_err());
        let mut bad = BackboneContract::reference_tiny();
        bad.stage_spatial = [(16, 16), (16, 16), (4, 4)];
        assert!(bad.validate().is_err());
        let mut odd = BackboneContract::reference_tiny();
        odd.stage_spatial = [(15, 15), (5, 5), (1, 1)];
        assert!(ReferenceBackbone::new(odd).is_err());
    }
}
