use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{load_manifest, DatasetManifest};
use crate::error::{Error, Result};
use crate::rating_stats::{expected_sos, fit_a, sos_of, LabelCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SosSource {
    Manifest,
    /// Standard deviation of each entry's distribution.
    Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub dataset: String,
    pub category: LabelCategory,
    pub num_samples: usize,
    pub sos_source: SosSource,
    pub a: f64,
    /// Residuals `sos − expected_sos(mos, a)`.
    pub residual_rmse: f64,
    pub residual_mean: f64,
    pub residual_max_abs: f64,
}

pub fn calibrate_manifest(manifest: &DatasetManifest) -> Result<CalibrationReport> {
    let (pairs, source): (Vec<(f64, f64)>, _) = match manifest.category {
        LabelCategory::MosOnly => {
            return Err(Error::InvalidLabels(format!(
                "manifest {:?} carries only MOS; calibrating a needs per-image sos \
                 (MOS_SOS_AVAILABLE) or an opinion distribution (DOS_AVAILABLE)",
                manifest.name
            )))
        }
        LabelCategory::MosSosAvailable => (
            manifest
                .labels()
                .iter()
                .map(|l| (l.mos(), l.sos().expect("validated")))
                .collect(),
            SosSource::Manifest,
        ),
        LabelCategory::DosAvailable => (
            manifest
                .labels()
                .iter()
                .map(|l| (l.mos(), sos_of(l.dos().expect("validated"))))
                .collect(),
            SosSource::Distribution,
        ),
    };
    let scale = &manifest.scale;
    let a = fit_a(&pairs, scale)?;
    let residuals = pairs
        .iter()
        .map(|&(m, s)| Ok(s - expected_sos(m, scale, a)?))
        .collect::<Result<Vec<f64>>>()?;
    let n = residuals.len() as f64;
    Ok(CalibrationReport {
        dataset: manifest.name.clone(),
        category: manifest.category,
        num_samples: pairs.len(),
        sos_source: source,
        a,
        residual_rmse: (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
        residual_mean: residuals.iter().sum::<f64>() / n,
        residual_max_abs: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    })
}

pub fn cmd_calibrate_a(manifest_path: &Path) -> Result<CalibrationReport> {
    calibrate_manifest(&load_manifest(manifest_path)?)
}
