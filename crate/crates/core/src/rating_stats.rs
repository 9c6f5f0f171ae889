//! Subjective-rating mathematics: quality scales, opinion-score
//! distributions, the MOS/SOS readouts, the quadratic SOS–MOS law and the
//! Gaussian label supplementation built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ probs = 1` for a valid distribution.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// The discrete rating axis: `C` ordered level scores inside a score range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScale {
    scores: Vec<f64>,
    range_start: f64,
    range_end: f64,
}

impl QualityScale {
    pub fn new(scores: Vec<f64>, range_start: f64, range_end: f64) -> Result<Self> {
        let scale = QualityScale {
            scores,
            range_start,
            range_end,
        };
        scale.validate()?;
        Ok(scale)
    }

    /// `num_levels` equally spaced scores spanning `[start, end]` inclusive.
    pub fn uniform(num_levels: usize, start: f64, end: f64) -> Result<Self> {
        if num_levels < 2 {
            return Err(Error::InvalidScale(format!(
                "need at least 2 levels, got {num_levels}"
            )));
        }
        let step = (end - start) / (num_levels - 1) as f64;
        let scores = (0..num_levels).map(|c| start + step * c as f64).collect();
        QualityScale::new(scores, start, end)
    }

    /// The 5-level `[1, 5]` scale used throughout the reference configuration.
    pub fn five_point() -> Self {
        QualityScale::uniform(5, 1.0, 5.0).expect("static scale is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() < 2 {
            return Err(Error::InvalidScale(format!(
                "need at least 2 levels, got {}",
                self.scores.len()
            )));
        }
        if !(self.range_start.is_finite() && self.range_end.is_finite())
            || self.range_start >= self.range_end
        {
            return Err(Error::InvalidScale(format!(
                "bad range [{}, {}]",
                self.range_start, self.range_end
            )));
        }
        if self.scores.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidScale(
                "scores must be strictly increasing".into(),
            ));
        }
        if self
            .scores
            .iter()
            .any(|&s| s < self.range_start || s > self.range_end)
        {
            return Err(Error::InvalidScale(
                "scores must lie within the score range".into(),
            ));
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn range_start(&self) -> f64 {
        self.range_start
    }

    pub fn range_end(&self) -> f64 {
        self.range_end
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.range_start + self.range_end)
    }

    /// `q(mos) = -mos² + (S_start + S_end)·mos - S_start·S_end`.
    ///
    /// Equal to `(mos - S_start)(S_end - mos)`, which is how it is evaluated
    /// so that the roots are exact.
    pub fn sos_quadratic(&self, mos: f64) -> f64 {
        (mos - self.range_start) * (self.range_end - mos)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.range_start && value <= self.range_end
    }

    /// Clamps `mos` into `[S_start + ε, S_end − ε]`, `ε = 1e-3·(S_end − S_start)`.
    pub fn clamp_interior(&self, mos: f64) -> f64 {
        let eps = 1e-3 * (self.range_end - self.range_start);
        mos.clamp(self.range_start + eps, self.range_end - eps)
    }

    fn check_in_range(&self, value: f64) -> Result<()> {
        if !value.is_finite() || !self.contains(value) {
            return Err(Error::OutOfRange {
                value,
                start: self.range_start,
                end: self.range_end,
            });
        }
        Ok(())
    }
}

/// A distribution of opinion scores over the levels of a [`QualityScale`].
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionDistribution {
    probs: Vec<f64>,
    scale: QualityScale,
}

impl OpinionDistribution {
    /// Validates non-negativity, length and `Σ probs = 1` within `tol`.
    pub fn with_tolerance(probs: Vec<f64>, scale: &QualityScale, tol: f64) -> Result<Self> {
        if probs.len() != scale.num_levels() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for a {}-level scale",
                probs.len(),
                scale.num_levels()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + tol) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(OpinionDistribution {
            probs,
            scale: scale.clone(),
        })
    }

    pub fn new(probs: Vec<f64>, scale: &QualityScale) -> Result<Self> {
        Self::with_tolerance(probs, scale, PROB_SUM_TOL)
    }

    pub fn uniform(scale: &QualityScale) -> Self {
        let c = scale.num_levels();
        OpinionDistribution {
            probs: vec![1.0 / c as f64; c],
            scale: scale.clone(),
        }
    }

    /// Point mass at zero-based level `index`.
    pub fn one_hot(index: usize, scale: &QualityScale) -> Result<Self> {
        if index >= scale.num_levels() {
            return Err(Error::InvalidLevel {
                level: index as i64 + 1,
                num_levels: scale.num_levels(),
            });
        }
        let mut probs = vec![0.0; scale.num_levels()];
        probs[index] = 1.0;
        Ok(OpinionDistribution {
            probs,
            scale: scale.clone(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn scale(&self) -> &QualityScale {
        &self.scale
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn mos(&self) -> f64 {
        mos_of(self)
    }

    pub fn sos(&self) -> f64 {
        sos_of(self)
    }
}

/// Which subjective labels a sample (or a whole database) exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelCategory {
    DosAvailable,
    MosSosAvailable,
    MosOnly,
}

impl LabelCategory {
    pub const ALL: [LabelCategory; 3] = [
        LabelCategory::DosAvailable,
        LabelCategory::MosSosAvailable,
        LabelCategory::MosOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelCategory::DosAvailable => "DOS_AVAILABLE",
            LabelCategory::MosSosAvailable => "MOS_SOS_AVAILABLE",
            LabelCategory::MosOnly => "MOS_ONLY",
        }
    }
}

impl std::fmt::Display for LabelCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LabelCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LabelCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown label category {s:?}")))
    }
}

/// Ground truth for one image. Constructed only through [`SampleLabels::new`],
/// which enforces the category invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLabels {
    mos: f64,
    sos: Option<f64>,
    dos: Option<OpinionDistribution>,
    category: LabelCategory,
}

/// Tolerance between a stated MOS and the mean of the stated DOS.
pub const MOS_DOS_CONSISTENCY_TOL: f64 = 1e-6;

impl SampleLabels {
    pub fn new(
        category: LabelCategory,
        mos: f64,
        sos: Option<f64>,
        dos: Option<OpinionDistribution>,
        scale: &QualityScale,
    ) -> Result<Self> {
        if !mos.is_finite() || !scale.contains(mos) {
            return Err(Error::InvalidLabels(format!(
                "mos {mos} outside [{}, {}]",
                scale.range_start(),
                scale.range_end()
            )));
        }
        if let Some(s) = sos {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidLabels(format!("sos {s} must be non-negative")));
            }
        }
        match (category, sos.is_some(), dos.is_some()) {
            (LabelCategory::DosAvailable, _, true) => {}
            (LabelCategory::DosAvailable, _, false) => {
                return Err(Error::InvalidLabels("DOS_AVAILABLE requires a dos".into()))
            }
            (LabelCategory::MosSosAvailable, true, false) => {}
            (LabelCategory::MosSosAvailable, _, _) => {
                return Err(Error::InvalidLabels(
                    "MOS_SOS_AVAILABLE requires sos and no dos".into(),
                ))
            }
            (LabelCategory::MosOnly, false, false) => {}
            (LabelCategory::MosOnly, _, _) => {
                return Err(Error::InvalidLabels(
                    "MOS_ONLY forbids sos and dos".into(),
                ))
            }
        }
        if let Some(d) = &dos {
            if d.scale() != scale {
                return Err(Error::ScaleMismatch("dos bound to a different scale".into()));
            }
            let implied = mos_of(d);
            if (implied - mos).abs() > MOS_DOS_CONSISTENCY_TOL {
                return Err(Error::InvalidLabels(format!(
                    "mos {mos} disagrees with dos mean {implied}"
                )));
            }
        }
        Ok(SampleLabels {
            mos,
            sos,
            dos,
            category,
        })
    }

    pub fn mos(&self) -> f64 {
        self.mos
    }

    pub fn sos(&self) -> Option<f64> {
        self.sos
    }

    pub fn dos(&self) -> Option<&OpinionDistribution> {
        self.dos.as_ref()
    }

    pub fn category(&self) -> LabelCategory {
        self.category
    }
}

/// Empirical histogram of integer ratings on levels `1..=C`.
pub fn dos_from_ratings(ratings: &[i64], scale: &QualityScale) -> Result<OpinionDistribution> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let c = scale.num_levels();
    let mut counts = vec![0usize; c];
    for &r in ratings {
        if r < 1 || r as usize > c {
            return Err(Error::InvalidLevel {
                level: r,
                num_levels: c,
            });
        }
        counts[r as usize - 1] += 1;
    }
    let n = ratings.len() as f64;
    let probs = counts.into_iter().map(|k| k as f64 / n).collect();
    OpinionDistribution::new(probs, scale)
}

/// Mean opinion score `Σ s_c·p_c`.
///
/// Summed as `mid + Σ (s_c − mid)·p_c` with mirrored levels paired, so a
/// distribution symmetric about the centre of a symmetric scale returns the
/// centre exactly.
pub fn mos_of(dos: &OpinionDistribution) -> f64 {
    let scores = dos.scale.scores();
    let p = &dos.probs;
    let c = scores.len();
    let mid = 0.5 * (scores[0] + scores[c - 1]);
    let mut acc = 0.0;
    for lo in 0..c / 2 {
        let hi = c - 1 - lo;
        acc += (scores[lo] - mid) * p[lo] + (scores[hi] - mid) * p[hi];
    }
    if c % 2 == 1 {
        acc += (scores[c / 2] - mid) * p[c / 2];
    }
    mid + acc
}

/// Standard deviation of opinion scores.
pub fn sos_of(dos: &OpinionDistribution) -> f64 {
    let mean = mos_of(dos);
    let var: f64 = dos
        .scale
        .scores()
        .iter()
        .zip(&dos.probs)
        .map(|(s, p)| p * (s - mean) * (s - mean))
        .sum();
    var.max(0.0).sqrt()
}

/// SOS predicted from MOS by the quadratic law `SOS² = a·q(MOS)`.
pub fn expected_sos(mos: f64, scale: &QualityScale, a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Config(format!("coefficient a must be positive, got {a}")));
    }
    scale.check_in_range(mos)?;
    Ok((a * scale.sos_quadratic(mos)).max(0.0).sqrt())
}

/// Least-squares estimate of `a` regressing `sos²` on `q(mos)` through the
/// origin: `a = Σ sos²·q / Σ q²`.
pub fn fit_a(samples: &[(f64, f64)], scale: &QualityScale) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(mos, sos) in samples {
        if !mos.is_finite() || !sos.is_finite() {
            return Err(Error::Numeric(format!("sample ({mos}, {sos})")));
        }
        if !scale.contains(mos) {
            return Err(Error::OutOfRange {
                value: mos,
                start: scale.range_start(),
                end: scale.range_end(),
            });
        }
        let q = scale.sos_quadratic(mos);
        num += sos * sos * q;
        den += q * q;
    }
    if den == 0.0 {
        return Err(Error::DegenerateFit(
            "every mos lies on a range endpoint".into(),
        ));
    }
    let a = num / den;
    if !(a > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted a = {a} is not positive")));
    }
    Ok(a)
}

/// Gaussian density evaluated at each level score and renormalised.
pub fn gaussian_dos(mos: f64, sos: f64, scale: &QualityScale) -> Result<OpinionDistribution> {
    if !(sos > 0.0) || !sos.is_finite() {
        return Err(Error::InvalidSigma(sos));
    }
    scale.check_in_range(mos)?;
    let inv = 1.0 / (2.0 * sos * sos);
    // The 1/(σ√2π) factor cancels in the renormalisation. Subtracting the
    // smallest exponent keeps the largest weight at exactly 1.
    let exps: Vec<f64> = scale
        .scores()
        .iter()
        .map(|s| (s - mos) * (s - mos) * inv)
        .collect();
    let min = exps.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = exps.iter().map(|e| (min - e).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| w / z).collect();
    OpinionDistribution::new(probs, scale)
}
