//! Short-term memory (mask, attention features, global semantics), the gated
//! relational long-term memory, and the dual-pathway quality head.
//!
//! Shapes, with `D` the fused feature length, `C'` the memory width and `C`
//! the number of quality levels:
//!
//! * `af`, `s`, `l`: `C' × C`
//! * label-space relations `A`, gate `G_a`: `C × C`
//! * feature-space relations `W`, gate `G_w`: `C' × C'`

use rand::RngCore;

use super::{QualityPrediction, SlmConfig};
use crate::autograd::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::rating_stats::{OpinionDistribution, QualityScale};

/// Epsilon inside the row normalisation of Gram matrices.
const GRAM_EPS: f64 = 1e-6;

pub struct ShortTermOutputs {
    /// `1 × C` level mask.
    pub mask: Var,
    /// Attention features, `C' × C`.
    pub af: Var,
    /// Global semantics, `C' × C` with identical columns.
    pub gs: Var,
    /// Short-term memory, `C' × C`.
    pub s: Var,
}

pub struct LongTermTrace {
    pub a0: Var,
    pub w0: Var,
    pub gate_a: Var,
    pub gate_w: Var,
    pub y_af: Var,
    pub y_s: Var,
    pub a1: Var,
    pub w1: Var,
    /// Long-term memory, `C' × C`, entries in `(0, 1)`.
    pub l: Var,
}

pub struct HeadOutputs {
    /// `None` when both pathways are disabled and the memory branch is skipped.
    pub d_mem: Option<Var>,
    pub d_alg: Var,
    pub d_p: Var,
    pub mos: Var,
    pub sos: Var,
}

/// Creates every `slm.*` and `head.*` parameter. Biases and the two gate
/// matrices start at zero.
pub fn init_head_params(
    store: &mut ParamStore,
    fused_len: usize,
    cfg: &SlmConfig,
    rng: &mut dyn RngCore,
) {
    let (d, h, c) = (fused_len, cfg.hidden_channels, cfg.num_levels);
    let mut rng = rng;
    store.init_linear("slm.mask.fc1.weight", d, h, &mut rng);
    store.init_zeros("slm.mask.fc1.bias", 1, h);
    store.init_linear("slm.mask.fc2.weight", h, c, &mut rng);
    store.init_zeros("slm.mask.fc2.bias", 1, c);
    store.init_linear("slm.proj.weight", d, h, &mut rng);
    store.init_zeros("slm.proj.bias", 1, h);
    // Left-multiplying weight: C' × 2C'.
    let mut fuse = ParamStore::new();
    fuse.init_linear("w", 2 * h, h, &mut rng);
    store.insert("slm.fuse.weight", fuse.get("w").unwrap().t().to_owned());
    store.init_zeros("slm.fuse.bias", h, 1);
    store.init_linear("slm.fa.weight", c, c, &mut rng);
    store.init_zeros("slm.fa.bias", 1, c);
    store.init_linear("slm.fw.weight", h, h, &mut rng);
    store.init_zeros("slm.fw.bias", 1, h);
    store.init_zeros("slm.gate_a.weight", c, 2 * c);
    store.init_zeros("slm.gate_w.weight", h, 2 * h);
    store.init_linear("head.fc2.weight", d, h, &mut rng);
    store.init_zeros("head.fc2.bias", 1, h);
    store.init_linear("head.fc1.weight", h, c, &mut rng);
    store.init_zeros("head.fc1.bias", 1, c);
}

fn linear(g: &mut Graph<'_>, x: Var, prefix: &str) -> Result<Var> {
    let w = g.param(&format!("{prefix}.weight"))?;
    let b = g.param(&format!("{prefix}.bias"))?;
    let y = g.matmul(x, w);
    Ok(g.add_row_bias(y, b))
}

fn ensure_finite(g: &Graph<'_>, v: Var, what: &str) -> Result<()> {
    if g.value(v).iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite values")))
    }
}

/// Mask, attention features, global semantics and short-term memory from the
/// fused `1 × D` feature row.
pub fn short_term_memory(g: &mut Graph<'_>, fused: Var, cfg: &SlmConfig) -> Result<ShortTermOutputs> {
    ensure_finite(g, fused, "fused features")?;
    let hidden = linear(g, fused, "slm.mask.fc1")?;
    let hidden = g.relu(hidden);
    let mask = linear(g, hidden, "slm.mask.fc2")?;

    // 1×1 projection of the pooled vector to C' channels.
    let p = linear(g, fused, "slm.proj")?;
    let p = g.transpose(p);
    let af = g.matmul(p, mask);

    let pooled = g.mean_cols(af);
    let pooled = g.relu(pooled);
    let gs = g.broadcast_cols(pooled, cfg.num_levels);

    let stacked = g.concat_rows(&[af, gs])?;
    let w = g.param("slm.fuse.weight")?;
    let b = g.param("slm.fuse.bias")?;
    let s = g.matmul(w, stacked);
    let s = g.add_col_bias(s, b);
    Ok(ShortTermOutputs { mask, af, gs, s })
}

/// Row-normalised Gram matrix over the columns (`label == true`, `C × C`) or
/// rows (`C' × C'`) of `x`.
fn gram(g: &mut Graph<'_>, x: Var, label: bool) -> Var {
    let xt = g.transpose(x);
    let m = if label { g.matmul(xt, x) } else { g.matmul(x, xt) };
    g.row_l2_normalize(m, GRAM_EPS)
}

/// Label-space relation map `f^a`: `C' × C → C × C`.
fn relation_label(g: &mut Graph<'_>, x: Var) -> Result<Var> {
    let n = gram(g, x, true);
    let y = linear(g, n, "slm.fa")?;
    Ok(g.tanh(y))
}

/// Feature-space relation map `f^w`: `C' × C → C' × C'`.
fn relation_feature(g: &mut Graph<'_>, x: Var) -> Result<Var> {
    let n = gram(g, x, false);
    let y = linear(g, n, "slm.fw")?;
    Ok(g.tanh(y))
}

/// Two-pass gated relational refinement producing the long-term memory.
pub fn long_term_memory(g: &mut Graph<'_>, af: Var, s: Var, cfg: &SlmConfig) -> Result<LongTermTrace> {
    let expected = (cfg.hidden_channels, cfg.num_levels);
    if g.shape(af) != expected || g.shape(s) != expected {
        return Err(Error::Shape(format!(
            "long-term memory expects {expected:?} inputs, got {:?} and {:?}",
            g.shape(af),
            g.shape(s)
        )));
    }
    ensure_finite(g, af, "attention features")?;
    ensure_finite(g, s, "short-term memory")?;

    let a0 = relation_label(g, af)?;
    let w0 = relation_feature(g, s)?;

    let rel_a = gram(g, af, true);
    let stacked = g.concat_rows(&[a0, rel_a])?;
    let la = g.param("slm.gate_a.weight")?;
    let gate_a = g.matmul(la, stacked);
    let gate_a = g.tanh(gate_a);

    let rel_w = gram(g, s, false);
    let stacked = g.concat_rows(&[w0, rel_w])?;
    let lw = g.param("slm.gate_w.weight")?;
    let gate_w = g.matmul(lw, stacked);
    let gate_w = g.tanh(gate_w);

    let gated_a = g.mul(gate_a, a0);
    let mix = g.matmul(af, gated_a);
    let y_af = g.add(af, mix);
    let gated_w = g.mul(gate_w, w0);
    let mix = g.matmul(gated_w, s);
    let y_s = g.add(s, mix);

    let a1 = relation_label(g, y_af)?;
    let w1 = relation_feature(g, y_s)?;

    let sum = g.add(af, s);
    let l = g.matmul(w1, sum);
    let l = g.matmul(l, a1);
    let l = g.sigmoid(l);
    ensure_finite(g, l, "long-term memory")?;
    Ok(LongTermTrace {
        a0,
        w0,
        gate_a,
        gate_w,
        y_af,
        y_s,
        a1,
        w1,
        l,
    })
}

/// Full head on a `1 × D` fused row: memory DOS, algorithmic DOS, their
/// mixture and the MOS/SOS readout.
pub fn head_forward(
    g: &mut Graph<'_>,
    fused: Var,
    cfg: &SlmConfig,
    scale: &QualityScale,
) -> Result<HeadOutputs> {
    if scale.num_levels() != cfg.num_levels {
        return Err(Error::Config(format!(
            "scale has {} levels but the network predicts {}",
            scale.num_levels(),
            cfg.num_levels
        )));
    }
    ensure_finite(g, fused, "fused features")?;

    let hidden = linear(g, fused, "head.fc2")?;
    let hidden = g.relu(hidden);
    let logits = linear(g, hidden, "head.fc1")?;
    let d_alg = g.softmax_rows(logits);

    let (d_mem, d_p) = if cfg.memory_enabled() {
        let stm = short_term_memory(g, fused, cfg)?;
        let memory = match (cfg.enable_direct_pathway, cfg.enable_indirect_pathway) {
            (true, true) => {
                let ltm = long_term_memory(g, stm.af, stm.s, cfg)?;
                g.add(stm.af, ltm.l)
            }
            (false, true) => long_term_memory(g, stm.af, stm.s, cfg)?.l,
            _ => stm.af,
        };
        let pooled = g.mean_rows(memory);
        let d_mem = g.softmax_rows(pooled);
        let a = g.scale(d_mem, cfg.lambda_mix);
        let b = g.scale(d_alg, 1.0 - cfg.lambda_mix);
        (Some(d_mem), g.add(a, b))
    } else {
        (None, d_alg)
    };

    let scores = g.column(scale.scores());
    let mos = g.matmul(d_p, scores);
    let row = g.row(scale.scores());
    let neg_mos = g.scale(mos, -1.0);
    let centred = g.add_scalar(row, neg_mos);
    let sq = g.square(centred);
    let weighted = g.mul(sq, d_p);
    let var = g.sum(weighted);
    let sos = g.sqrt(var);
    Ok(HeadOutputs {
        d_mem,
        d_alg,
        d_p,
        mos,
        sos,
    })
}

/// Inference on a fused feature vector.
///
/// When both pathways are disabled `d_mem` is reported equal to `d_alg`.
pub fn predict(
    params: &ParamStore,
    fused: &[f64],
    cfg: &SlmConfig,
    scale: &QualityScale,
) -> Result<QualityPrediction> {
    cfg.validate()?;
    let expected = params
        .get("head.fc2.weight")
        .ok_or_else(|| Error::Config("missing parameter head.fc2.weight".into()))?
        .nrows();
    if fused.len() != expected {
        return Err(Error::Shape(format!(
            "fused vector has length {}, head expects {expected}",
            fused.len()
        )));
    }
    let mut g = Graph::new(params);
    let f = g.row(fused);
    let out = head_forward(&mut g, f, cfg, scale)?;
    prediction_from(&g, &out, scale)
}

pub(crate) fn prediction_from(
    g: &Graph<'_>,
    out: &HeadOutputs,
    scale: &QualityScale,
) -> Result<QualityPrediction> {
    let dist = |v: Var| {
        let probs = g.value(v).iter().copied().collect();
        OpinionDistribution::new(probs, scale)
    };
    let d_alg = dist(out.d_alg)?;
    let d_mem = match out.d_mem {
        Some(v) => dist(v)?,
        None => d_alg.clone(),
    };
    let d_p = dist(out.d_p)?;
    Ok(QualityPrediction {
        d_mem,
        d_alg,
        d_p,
        mos_p: g.scalar(out.mos),
        sos_p: g.scalar(out.sos),
    })
}
