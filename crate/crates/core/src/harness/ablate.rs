use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TrainSubset};
use super::eval::evaluate_indices;
use super::train::{split_plan, train_indices, train_model, LoadedDataset};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::metrics::{MosSummary, SplitResult};
use crate::network::StageMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AblationAxis {
    Stages,
    Pathways,
    Losses,
    Balance,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 4] = [
        AblationAxis::Stages,
        AblationAxis::Pathways,
        AblationAxis::Losses,
        AblationAxis::Balance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationAxis::Stages => "STAGES",
            AblationAxis::Pathways => "PATHWAYS",
            AblationAxis::Losses => "LOSSES",
            AblationAxis::Balance => "BALANCE",
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ablation axis {s:?}")))
    }
}

/// One configuration of a sweep with the flags that distinguish it.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub flags: BTreeMap<String, String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub axis: AblationAxis,
    pub variants: Vec<Variant>,
}

fn mark(on: bool) -> String {
    if on { "yes" } else { "no" }.to_string()
}

impl AblationSpec {
    /// STAGES and LOSSES give the seven non-empty subsets, PATHWAYS the four
    /// flag combinations, BALANCE the base weights plus each weight doubled
    /// and halved.
    pub fn generate(base: &RunConfig, axis: AblationAxis) -> Result<Self> {
        let mut variants = Vec::new();
        match axis {
            AblationAxis::Stages => {
                for mask in StageMask::all_subsets() {
                    let mut config = base.clone();
                    config.stages = mask;
                    let flags = (0..3).map(|i| (format!("stage{}", i + 1), mark(mask.0[i]))).collect();
                    variants.push(Variant {
                        label: mask.label(),
                        flags,
                        config,
                    });
                }
            }
            AblationAxis::Pathways => {
                for (direct, indirect) in [(true, true), (true, false), (false, true), (false, false)] {
                    let mut config = base.clone();
                    config.slm.enable_direct_pathway = direct;
                    config.slm.enable_indirect_pathway = indirect;
                    let flags = BTreeMap::from([
                        ("direct".to_string(), mark(direct)),
                        ("indirect".to_string(), mark(indirect)),
                    ]);
                    variants.push(Variant {
                        label: format!("direct={},indirect={}", mark(direct), mark(indirect)),
                        flags,
                        config,
                    });
                }
            }
            AblationAxis::Losses => {
                let kinds = [LossKind::Emd, LossKind::L1, LossKind::Esd];
                for bits in (1u8..8).rev() {
                    let chosen: Vec<LossKind> =
                        (0..3).filter(|i| bits & (4 >> i) != 0).map(|i| kinds[i]).collect();
                    let mut config = base.clone();
                    config.weights = base.weights.with_enabled(chosen.iter().copied())?;
                    let flags = kinds
                        .iter()
                        .map(|k| (k.as_str().to_string(), mark(chosen.contains(k))))
                        .collect();
                    let names: Vec<_> = chosen.iter().map(|k| k.as_str()).collect();
                    variants.push(Variant {
                        label: names.join("+"),
                        flags,
                        config,
                    });
                }
            }
            AblationAxis::Balance => {
                let mut push = |label: String, config: RunConfig| {
                    let w = &config.weights;
                    let flags = BTreeMap::from([
                        ("alpha".to_string(), w.alpha().to_string()),
                        ("beta".to_string(), w.beta().to_string()),
                        ("gamma".to_string(), w.gamma().to_string()),
                    ]);
                    variants.push(Variant { label, flags, config });
                };
                push("base".into(), base.clone());
                for (kind, name) in [(LossKind::Emd, "alpha"), (LossKind::L1, "beta"), (LossKind::Esd, "gamma")] {
                    for (factor, tag) in [(2.0, "2x"), (0.5, "0.5x")] {
                        let mut config = base.clone();
                        config.weights = base.weights.scaled(kind, factor)?;
                        push(format!("{tag} {name}"), config);
                    }
                }
            }
        }
        Ok(AblationSpec { axis, variants })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub flags: BTreeMap<String, String>,
    pub split_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    /// Metrics on the training entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<MosSummary>,
    /// Metrics on the held-out entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<SplitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AblationRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
}

/// Trains and scores one variant. Errors end up in the row, not the caller.
pub fn run_variant(variant: &Variant, data: &LoadedDataset) -> AblationRow {
    let mut row = AblationRow {
        variant: variant.label.clone(),
        flags: variant.flags.clone(),
        split_hash: String::new(),
        final_loss: None,
        train: None,
        test: None,
        error: None,
    };
    let config = &variant.config;
    let result = (|| -> Result<()> {
        let plan = split_plan(config, data.len())?;
        let (_, hash) = train_indices(config, &plan, data.len())?;
        row.split_hash = hash;
        let outcome = train_model(config, data)?;
        row.final_loss = outcome.loss_log.last().map(|l| l.total);
        let spec = config.preprocess_spec();
        let train = evaluate_indices(&outcome.model, data, &outcome.train_indices, spec, "train")?;
        row.train = Some(train.mos);
        if let TrainSubset::Split(k) = config.split.train_on {
            let test = &plan.splits[k].test;
            row.test = Some(evaluate_indices(&outcome.model, data, test, spec, &format!("split-{k}"))?);
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(format!("{}: {e}", e.kind()));
    }
    row
}

/// Runs every variant on the same data, seeds and split.
pub fn run_ablation(spec: &AblationSpec, data: &LoadedDataset) -> AblationTable {
    AblationTable {
        axis: spec.axis,
        rows: spec.variants.iter().map(|v| run_variant(v, data)).collect(),
    }
}

pub fn cmd_ablate(base: &RunConfig, axis: AblationAxis) -> Result<AblationTable> {
    base.validate()?;
    let spec = AblationSpec::generate(base, axis)?;
    let data = LoadedDataset::load(&base.manifest_path)?;
    Ok(run_ablation(&spec, &data))
}
