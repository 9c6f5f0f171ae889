use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TrainSubset};
use crate::autograd::Graph;
use crate::data::{load_image, load_manifest, make_splits_with, preprocess, DatasetManifest, SplitPlan};
use crate::error::{Error, Result};
use crate::losses::{loss_on_graph, route_labels, TrainingTarget};
use crate::network::{save_checkpoint, QualityModel};
use crate::optim::{clip_global_norm, Adam};

pub const CHECKPOINT_FILE: &str = "model.safetensors";
pub const LOSS_LOG_FILE: &str = "loss_log.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "config.json";

/// A manifest with every image decoded.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub images: Vec<DynamicImage>,
}

impl LoadedDataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = load_manifest(manifest_path)?;
        let images = (0..manifest.len())
            .map(|i| load_image(&manifest.image_path(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedDataset { manifest, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Mean per-sample losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub emd: f64,
    pub l1: f64,
    pub esd: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QualityModel,
    pub loss_log: Vec<EpochLoss>,
    pub plan: SplitPlan,
    pub train_indices: Vec<usize>,
    /// Digest of the split the run trained on (or of the full index list).
    pub split_hash: String,
}

pub fn split_plan(config: &RunConfig, n: usize) -> Result<SplitPlan> {
    let s = &config.split;
    make_splits_with(n, s.seed, s.num_repeats, s.train_fraction)
}

/// Resolves the training indices and their digest.
pub fn train_indices(config: &RunConfig, plan: &SplitPlan, n: usize) -> Result<(Vec<usize>, String)> {
    match config.split.train_on {
        TrainSubset::Split(k) => {
            let split = plan.splits.get(k).ok_or_else(|| {
                Error::Config(format!("split {k} requested, plan has {}", plan.splits.len()))
            })?;
            Ok((split.train.clone(), split.digest()))
        }
        TrainSubset::All => {
            let all = crate::data::Split {
                train: (0..n).collect(),
                test: Vec::new(),
            };
            Ok((all.train.clone(), all.digest()))
        }
    }
}

pub fn routed_targets(config: &RunConfig, data: &LoadedDataset) -> Result<Vec<TrainingTarget>> {
    data.manifest
        .labels()
        .iter()
        .map(|l| route_labels(l, &data.manifest.scale, config.a))
        .collect()
}

/// Trains in memory. Per-sample gradients are averaged over each batch;
/// the step size is constant.
pub fn train_model(config: &RunConfig, data: &LoadedDataset) -> Result<TrainOutcome> {
    config.validate()?;
    let model_cfg = config.model_config()?;
    let scale = data.manifest.scale.clone();
    let mut model = QualityModel::new(model_cfg, scale, config.seed)?;
    let plan = split_plan(config, data.len())?;
    let (indices, split_hash) = train_indices(config, &plan, data.len())?;
    let targets = routed_targets(config, data)?;
    let spec = config.preprocess_spec();
    let mut opt = Adam::new(config.optimizer.adam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order = indices.clone();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut acc: BTreeMap<String, Array2<f64>> = BTreeMap::new();
            for &i in batch {
                let image = preprocess(&data.images[i], spec, true, &mut rng)?;
                let mut g = Graph::new(&model.params);
                let head = model.forward(&mut g, &image)?;
                let lv = loss_on_graph(&mut g, &head, &targets[i], &config.weights)?;
                let values = [lv.total, lv.emd, lv.l1, lv.esd].map(|v| g.scalar(v));
                for (name, v) in ["total", "emd", "l1", "esd"].iter().zip(values) {
                    if !v.is_finite() {
                        return Err(Error::Numeric(format!(
                            "{name} loss is {v} in epoch {epoch}, batch {b}, sample {}",
                            data.manifest.entries[i].image_path
                        )));
                    }
                }
                for (s, v) in sums.iter_mut().zip(values) {
                    *s += v;
                }
                for (name, grad) in g.backward(lv.total).into_params() {
                    match acc.get_mut(&name) {
                        Some(a) => *a += &grad,
                        None => {
                            acc.insert(name, grad);
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for (name, grad) in acc.iter_mut() {
                grad.mapv_inplace(|v| v * inv);
                if grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "gradient of {name} is non-finite in epoch {epoch}, batch {b}"
                    )));
                }
            }
            if let Some(max) = config.optimizer.max_grad_norm {
                clip_global_norm(&mut acc, max);
            }
            opt.step(&mut model.params, &acc)?;
        }
        let n = order.len() as f64;
        log.push(EpochLoss {
            epoch,
            total: sums[0] / n,
            emd: sums[1] / n,
            l1: sums[2] / n,
            esd: sums[3] / n,
        });
    }
    Ok(TrainOutcome {
        model,
        loss_log: log,
        plan,
        train_indices: indices,
        split_hash,
    })
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub outcome: TrainOutcome,
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub resolved_config: PathBuf,
}

/// Trains from `config.manifest_path` and writes the checkpoint, loss log and
/// resolved configuration into `out_dir`.
pub fn cmd_train(config: &RunConfig, out_dir: &Path) -> Result<TrainArtifacts> {
    config.validate()?;
    let data = LoadedDataset::load(&config.manifest_path)?;
    let outcome = train_model(config, &data)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.model, &checkpoint)?;
    let loss_log = out_dir.join(LOSS_LOG_FILE);
    write_loss_log(&outcome.loss_log, &loss_log)?;
    let resolved_config = out_dir.join(RESOLVED_CONFIG_FILE);
    config.save(&resolved_config)?;
    Ok(TrainArtifacts {
        outcome,
        checkpoint,
        loss_log,
        resolved_config,
    })
}

pub fn write_loss_log(log: &[EpochLoss], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for row in log {
        let line = serde_json::to_string(row).expect("loss row serialises");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
