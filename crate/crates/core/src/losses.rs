//! Multi-label training: label routing per database category, the EMD, L1
//! and ESD losses, and their weighted combination.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::network::{HeadOutputs, QualityPrediction};
use crate::rating_stats::{
    expected_sos, gaussian_dos, LabelCategory, OpinionDistribution, QualityScale, SampleLabels,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LossKind {
    Emd,
    L1,
    Esd,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Emd, LossKind::L1, LossKind::Esd];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Emd => "EMD",
            LossKind::L1 => "L1",
            LossKind::Esd => "ESD",
        }
    }
}

/// Balance factors and the set of active losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossWeightsRaw", into = "LossWeightsRaw")]
pub struct LossWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
    enabled: BTreeSet<LossKind>,
}

#[derive(Serialize, Deserialize)]
struct LossWeightsRaw {
    alpha: f64,
    beta: f64,
    gamma: f64,
    enabled: BTreeSet<LossKind>,
}

impl TryFrom<LossWeightsRaw> for LossWeights {
    type Error = Error;

    fn try_from(r: LossWeightsRaw) -> Result<Self> {
        LossWeights::new(r.alpha, r.beta, r.gamma, r.enabled)
    }
}

impl From<LossWeights> for LossWeightsRaw {
    fn from(w: LossWeights) -> Self {
        LossWeightsRaw {
            alpha: w.alpha,
            beta: w.beta,
            gamma: w.gamma,
            enabled: w.enabled,
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights::new(200.0, 10.0, 1.0, LossKind::ALL).expect("static weights are valid")
    }
}

impl LossWeights {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        enabled: impl IntoIterator<Item = LossKind>,
    ) -> Result<Self> {
        let w = LossWeights {
            alpha,
            beta,
            gamma,
            enabled: enabled.into_iter().collect(),
        };
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !w.enabled.iter().any(|k| w.weight(*k) > 0.0) {
            return Err(Error::Config(
                "at least one loss must be enabled with a positive weight".into(),
            ));
        }
        Ok(w)
    }

    /// Same balance factors with only `enabled` switched on.
    pub fn with_enabled(&self, enabled: impl IntoIterator<Item = LossKind>) -> Result<Self> {
        LossWeights::new(self.alpha, self.beta, self.gamma, enabled)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn enabled(&self) -> &BTreeSet<LossKind> {
        &self.enabled
    }

    pub fn is_enabled(&self, kind: LossKind) -> bool {
        self.enabled.contains(&kind)
    }

    pub fn weight(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Emd => self.alpha,
            LossKind::L1 => self.beta,
            LossKind::Esd => self.gamma,
        }
    }

    /// Weight applied in the total: zero when the loss is disabled.
    pub fn effective(&self, kind: LossKind) -> f64 {
        if self.is_enabled(kind) {
            self.weight(kind)
        } else {
            0.0
        }
    }

    /// Multiplies one balance factor by `factor`.
    pub fn scaled(&self, kind: LossKind, factor: f64) -> Result<Self> {
        let mut w = self.clone();
        match kind {
            LossKind::Emd => w.alpha *= factor,
            LossKind::L1 => w.beta *= factor,
            LossKind::Esd => w.gamma *= factor,
        }
        LossWeights::new(w.alpha, w.beta, w.gamma, w.enabled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    GroundTruthDos,
    GaussianFromMosSos,
    GaussianFromMosOnly,
}

/// What one image is trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTarget {
    pub dos_target: OpinionDistribution,
    pub mos_target: f64,
    /// Expected SOS from the quadratic law; the ESD reference.
    pub sos_reference: f64,
    pub provenance: Provenance,
}

/// Supplements missing labels according to the sample's category.
pub fn route_labels(labels: &SampleLabels, scale: &QualityScale, a: f64) -> Result<TrainingTarget> {
    let mos = scale.clamp_interior(labels.mos());
    let sos_reference = expected_sos(mos, scale, a)?;
    let (dos_target, provenance) = match labels.category() {
        LabelCategory::DosAvailable => {
            let dos = labels
                .dos()
                .ok_or_else(|| Error::InvalidLabels("DOS_AVAILABLE sample without dos".into()))?;
            (dos.clone(), Provenance::GroundTruthDos)
        }
        LabelCategory::MosSosAvailable => {
            let sos = labels
                .sos()
                .ok_or_else(|| Error::InvalidLabels("MOS_SOS_AVAILABLE sample without sos".into()))?;
            (gaussian_dos(mos, sos, scale)?, Provenance::GaussianFromMosSos)
        }
        LabelCategory::MosOnly => (
            gaussian_dos(mos, sos_reference, scale)?,
            Provenance::GaussianFromMosOnly,
        ),
    };
    Ok(TrainingTarget {
        dos_target,
        mos_target: labels.mos(),
        sos_reference,
        provenance,
    })
}

/// Root-mean-square difference of the cumulative distributions.
pub fn emd(pred: &[f64], target: &[f64]) -> f64 {
    let c = pred.len();
    let mut cp = 0.0;
    let mut ct = 0.0;
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        cp += p;
        ct += t;
        acc += (ct - cp) * (ct - cp);
    }
    (acc / c as f64).sqrt()
}

pub fn emd_loss(pred: &OpinionDistribution, target: &OpinionDistribution) -> Result<f64> {
    if pred.len() != target.len() || pred.scale() != target.scale() {
        return Err(Error::ScaleMismatch(format!(
            "{}-level prediction against {}-level target",
            pred.len(),
            target.len()
        )));
    }
    Ok(emd(pred.probs(), target.probs()))
}

pub fn l1_loss(mos_pred: f64, mos_target: f64) -> f64 {
    (mos_target - mos_pred).abs()
}

pub fn esd_loss(sos_pred: f64, sos_reference: f64) -> f64 {
    (sos_reference - sos_pred) * (sos_reference - sos_pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentLosses {
    pub emd: f64,
    pub l1: f64,
    pub esd: f64,
}

impl ComponentLosses {
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.effective(LossKind::Emd) * self.emd
            + w.effective(LossKind::L1) * self.l1
            + w.effective(LossKind::Esd) * self.esd
    }
}

pub fn component_losses(pred: &QualityPrediction, target: &TrainingTarget) -> Result<ComponentLosses> {
    Ok(ComponentLosses {
        emd: emd_loss(&pred.d_p, &target.dos_target)?,
        l1: l1_loss(pred.mos_p, target.mos_target),
        esd: esd_loss(pred.sos_p, target.sos_reference),
    })
}

pub fn total_loss(pred: &QualityPrediction, target: &TrainingTarget, weights: &LossWeights) -> Result<f64> {
    Ok(component_losses(pred, target)?.weighted_total(weights))
}

/// Loss nodes for one sample.
pub struct LossVars {
    pub total: Var,
    pub emd: Var,
    pub l1: Var,
    pub esd: Var,
}

/// The weighted loss on the tape, for backpropagation.
pub fn loss_on_graph(
    g: &mut Graph<'_>,
    head: &HeadOutputs,
    target: &TrainingTarget,
    weights: &LossWeights,
) -> Result<LossVars> {
    let c = target.dos_target.len();
    if g.shape(head.d_p) != (1, c) {
        return Err(Error::ScaleMismatch(format!(
            "prediction shape {:?} against {c}-level target",
            g.shape(head.d_p)
        )));
    }
    let upper = Array2::from_shape_fn((c, c), |(i, j)| if i <= j { 1.0 } else { 0.0 });
    let upper = g.constant(upper);
    let cum_p = g.matmul(head.d_p, upper);
    let cum_t = g.row(target.dos_target.probs());
    let cum_t = g.matmul(cum_t, upper);
    let diff = g.sub(cum_t, cum_p);
    let sq = g.square(diff);
    let ss = g.sum(sq);
    let mean = g.scale(ss, 1.0 / c as f64);
    let emd = g.sqrt(mean);

    let mos_t = g.row(&[target.mos_target]);
    let d = g.sub(mos_t, head.mos);
    let l1 = g.abs(d);

    let sos_t = g.row(&[target.sos_reference]);
    let d = g.sub(sos_t, head.sos);
    let esd = g.square(d);

    let mut terms = Vec::new();
    for (kind, v) in [(LossKind::Emd, emd), (LossKind::L1, l1), (LossKind::Esd, esd)] {
        if weights.is_enabled(kind) {
            terms.push(g.scale(v, weights.weight(kind)));
        }
    }
    let mut total = terms[0];
    for t in &terms[1..] {
        total = g.add(total, *t);
    }
    Ok(LossVars { total, emd, l1, esd })
}
