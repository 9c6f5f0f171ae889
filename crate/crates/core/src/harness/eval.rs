use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::SplitParams;
use super::train::LoadedDataset;
use crate::data::{make_splits_with, preprocess, PreprocessSpec};
use crate::error::{Error, Result};
use crate::metrics::{dos_metrics, evaluate_mos, DosEvalReport, MosSummary, SplitResult};
use crate::network::{load_checkpoint, QualityModel, QualityPrediction};
use crate::rating_stats::LabelCategory;

/// Which entries `cmd_eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSubset {
    /// The test half of every split, plus their mean.
    TestSplits,
    /// The test half of split `k`.
    Split(usize),
    /// Every manifest entry.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub splits: Vec<SplitResult>,
    pub mean: SplitResult,
}

/// Centre-crop predictions for `indices`, in order.
pub fn predict_indices(
    model: &QualityModel,
    data: &LoadedDataset,
    indices: &[usize],
    spec: PreprocessSpec,
) -> Result<Vec<QualityPrediction>> {
    // Evaluation crops ignore the generator; any seed gives the same result.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    indices
        .iter()
        .map(|&i| model.predict_image(&preprocess(&data.images[i], spec, false, &mut rng)?))
        .collect()
}

/// MOS metrics against the manifest MOS; DOS metrics only when the manifest
/// carries ground-truth distributions.
pub fn evaluate_indices(
    model: &QualityModel,
    data: &LoadedDataset,
    indices: &[usize],
    spec: PreprocessSpec,
    split_id: &str,
) -> Result<SplitResult> {
    let preds = predict_indices(model, data, indices, spec)?;
    let labels = data.manifest.labels();
    let mos_pred: Vec<f64> = preds.iter().map(|p| p.mos_p).collect();
    let mos_gt: Vec<f64> = indices.iter().map(|&i| labels[i].mos()).collect();
    let mos = MosSummary::from(&evaluate_mos(&mos_pred, &mos_gt)?);
    let dos = if data.manifest.category == LabelCategory::DosAvailable {
        let reports = preds
            .iter()
            .zip(indices)
            .map(|(p, &i)| {
                let gt = labels[i]
                    .dos()
                    .ok_or_else(|| Error::InvalidLabels("DOS_AVAILABLE entry without dos".into()))?;
                dos_metrics(&p.d_p, gt)
            })
            .collect::<Result<Vec<_>>>()?;
        DosEvalReport::mean(&reports)
    } else {
        None
    };
    Ok(SplitResult {
        split_id: split_id.to_string(),
        mos,
        dos,
    })
}

pub fn check_compatible(model: &QualityModel, data: &LoadedDataset) -> Result<()> {
    let (ms, ds) = (model.scale(), &data.manifest.scale);
    if ms.num_levels() != ds.num_levels() {
        return Err(Error::Config(format!(
            "checkpoint predicts {} levels, manifest {:?} has {}",
            ms.num_levels(),
            data.manifest.name,
            ds.num_levels()
        )));
    }
    if ms != ds {
        return Err(Error::Config(format!(
            "checkpoint scale {:?} differs from manifest scale {:?}",
            ms.scores(),
            ds.scores()
        )));
    }
    Ok(())
}

pub fn evaluate_model(
    model: &QualityModel,
    data: &LoadedDataset,
    split: &SplitParams,
    subset: EvalSubset,
) -> Result<EvalReport> {
    check_compatible(model, data)?;
    let spec = PreprocessSpec::reference();
    let splits = match subset {
        EvalSubset::All => {
            let all: Vec<usize> = (0..data.len()).collect();
            vec![evaluate_indices(model, data, &all, spec, "all")?]
        }
        EvalSubset::Split(_) | EvalSubset::TestSplits => {
            let plan = make_splits_with(data.len(), split.seed, split.num_repeats, split.train_fraction)?;
            let ks: Vec<usize> = match subset {
                EvalSubset::Split(k) => vec![k],
                _ => (0..plan.splits.len()).collect(),
            };
            ks.into_iter()
                .map(|k| {
                    let s = plan.splits.get(k).ok_or_else(|| {
                        Error::Config(format!("split {k} requested, plan has {}", plan.splits.len()))
                    })?;
                    evaluate_indices(model, data, &s.test, spec, &format!("split-{k}"))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mean = SplitResult::mean(&splits, "mean").expect("at least one split");
    Ok(EvalReport { splits, mean })
}

pub fn cmd_eval(
    checkpoint: &Path,
    manifest_path: &Path,
    split: &SplitParams,
    subset: EvalSubset,
) -> Result<EvalReport> {
    let model = load_checkpoint(checkpoint, None)?;
    let data = LoadedDataset::load(manifest_path)?;
    evaluate_model(&model, &data, split, subset)
}
