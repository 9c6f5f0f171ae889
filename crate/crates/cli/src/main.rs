use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iqa_core::data::generate_synthetic_dataset;
use iqa_core::harness::{
    cmd_ablate, cmd_calibrate_a, cmd_eval, cmd_report, cmd_train, AblationAxis, BackboneKind,
    EvalSubset, RunConfig, SplitParams, TrainSubset,
};
use iqa_core::losses::LossKind;
use iqa_core::network::StageMask;
use iqa_core::rating_stats::{LabelCategory, QualityScale};
use iqa_core::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "iqa", version, about = "Opinion-score distribution IQA: train, evaluate, ablate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, loss log and resolved config.
    Train {
        #[command(flatten)]
        run: RunFlags,
        /// Output directory.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint and print the results JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        split: SplitFlags,
        /// `test-splits`, `split:<k>` or `all`.
        #[arg(long, default_value = "test-splits", value_parser = parse_subset)]
        subset: EvalSubset,
        /// Also write the results JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every variant along one ablation axis.
    Ablate {
        #[command(flatten)]
        run: RunFlags,
        /// STAGES, PATHWAYS, LOSSES or BALANCE.
        #[arg(long)]
        axis: AblationAxis,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the SOS-MOS coefficient a on a manifest.
    #[command(name = "calibrate-a")]
    CalibrateA {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate a synthetic dataset (images, manifest, hidden labels).
    Synth {
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// DOS_AVAILABLE, MOS_SOS_AVAILABLE or MOS_ONLY.
        #[arg(long, default_value = "DOS_AVAILABLE")]
        category: LabelCategory,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1477)]
        a_true: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 1.0)]
        range_start: f64,
        #[arg(long, default_value_t = 5.0)]
        range_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render tables and charts from a directory of results JSON files.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct SplitFlags {
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    num_repeats: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

impl SplitFlags {
    fn apply(&self, split: &mut SplitParams) {
        if let Some(v) = self.split_seed {
            split.seed = v;
        }
        if let Some(v) = self.num_repeats {
            split.num_repeats = v;
        }
        if let Some(v) = self.train_fraction {
            split.train_fraction = v;
        }
    }
}

/// Mirrors `RunConfig`; every flag overrides the `--config` file.
#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// reference_tiny or external.
    #[arg(long, value_parser = parse_backbone)]
    backbone: Option<BackboneKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Clip each batch gradient to this global L2 norm.
    #[arg(long)]
    max_grad_norm: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Enabled loss terms, e.g. `EMD,L1,ESD`.
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<String>>,
    #[arg(long)]
    num_levels: Option<usize>,
    #[arg(long)]
    hidden_channels: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    no_direct: bool,
    #[arg(long)]
    no_indirect: bool,
    /// Backbone stages to fuse, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<usize>>,
    #[command(flatten)]
    split: SplitFlags,
    /// `all` or a split index.
    #[arg(long, value_parser = parse_train_on)]
    train_on: Option<TrainSubset>,
}

fn parse_backbone(s: &str) -> std::result::Result<BackboneKind, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown backbone {s:?} (reference_tiny, external)"))
}

fn parse_train_on(s: &str) -> std::result::Result<TrainSubset, String> {
    if s == "all" {
        return Ok(TrainSubset::All);
    }
    s.parse().map(TrainSubset::Split).map_err(|_| format!("expected `all` or a split index, got {s:?}"))
}

fn parse_subset(s: &str) -> std::result::Result<EvalSubset, String> {
    match s {
        "test-splits" => Ok(EvalSubset::TestSplits),
        "all" => Ok(EvalSubset::All),
        _ => s
            .strip_prefix("split:")
            .and_then(|k| k.parse().ok())
            .map(EvalSubset::Split)
            .ok_or_else(|| format!("expected test-splits, split:<k> or all, got {s:?}")),
    }
}

fn parse_loss(s: &str) -> Result<LossKind> {
    match s.trim().to_ascii_uppercase().as_str() {
        "EMD" => Ok(LossKind::Emd),
        "L1" => Ok(LossKind::L1),
        "ESD" => Ok(LossKind::Esd),
        other => Err(Error::Config(format!("unknown loss {other:?} (EMD, L1, ESD)"))),
    }
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let manifest = self
                    .manifest
                    .clone()
                    .ok_or_else(|| Error::Config("--manifest is required without --config".into()))?;
                let epochs = self
                    .epochs
                    .ok_or_else(|| Error::Config("--epochs is required without --config".into()))?;
                RunConfig::new(manifest, epochs)
            }
        };
        if let Some(v) = &self.manifest {
            cfg.manifest_path = v.clone();
        }
        if let Some(v) = self.backbone {
            cfg.backbone = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.optimizer.adam.lr = v;
        }
        if let Some(v) = self.max_grad_norm {
            cfg.optimizer.max_grad_norm = Some(v);
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.a {
            cfg.a = v;
        }
        let w = &cfg.weights;
        let enabled: Vec<LossKind> = match &self.losses {
            Some(names) => names.iter().map(|n| parse_loss(n)).collect::<Result<_>>()?,
            None => w.enabled().iter().copied().collect(),
        };
        cfg.weights = iqa_core::losses::LossWeights::new(
            self.alpha.unwrap_or(w.alpha()),
            self.beta.unwrap_or(w.beta()),
            self.gamma.unwrap_or(w.gamma()),
            enabled,
        )?;
        if let Some(v) = self.num_levels {
            cfg.slm.num_levels = v;
        }
        if let Some(v) = self.hidden_channels {
            cfg.slm.hidden_channels = v;
        }
        if let Some(v) = self.lambda {
            cfg.slm.lambda_mix = v;
        }
        if self.no_direct {
            cfg.slm.enable_direct_pathway = false;
        }
        if self.no_indirect {
            cfg.slm.enable_indirect_pathway = false;
        }
        if let Some(stages) = &self.stages {
            let mut mask = [false; 3];
            for &s in stages {
                if !(1..=3).contains(&s) {
                    return Err(Error::Config(format!("stage {s} outside 1..=3")));
                }
                mask[s - 1] = true;
            }
            cfg.stages = StageMask(mask);
        }
        self.split.apply(&mut cfg.split);
        if let Some(v) = self.train_on {
            cfg.split.train_on = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serialises");
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
        }
        fs::write(path, &text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    }
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    checkpoint: &'a Path,
    loss_log: &'a Path,
    config: &'a Path,
    split_hash: &'a str,
    epochs: usize,
    final_loss: Option<f64>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { run, out } => {
            let cfg = run.resolve()?;
            let art = cmd_train(&cfg, &out)?;
            emit(
                &TrainSummary {
                    checkpoint: &art.checkpoint,
                    loss_log: &art.loss_log,
                    config: &art.resolved_config,
                    split_hash: &art.outcome.split_hash,
                    epochs: art.outcome.loss_log.len(),
                    final_loss: art.outcome.loss_log.last().map(|l| l.total),
                },
                None,
            )
        }
        Command::Eval { checkpoint, manifest, split, subset, out } => {
            let mut params = SplitParams::default();
            split.apply(&mut params);
            let report = cmd_eval(&checkpoint, &manifest, &params, subset)?;
            emit(&report, out.as_deref())
        }
        Command::Ablate { run, axis, out } => {
            let cfg = run.resolve()?;
            emit(&cmd_ablate(&cfg, axis)?, out.as_deref())
        }
        Command::CalibrateA { manifest } => emit(&cmd_calibrate_a(&manifest)?, None),
        Command::Synth { n, category, seed, a_true, levels, range_start, range_end, out } => {
            let scale = QualityScale::uniform(levels, range_start, range_end)?;
            let ds = generate_synthetic_dataset(n, &scale, category, seed, a_true)?;
            ds.write_to(&out)?;
            emit(
                &serde_json::json!({
                    "manifest": out.join("manifest.jsonl"),
                    "oracle": out.join("oracle.jsonl"),
                    "entries": n,
                    "category": category,
                }),
                None,
            )
        }
        Command::Report { results, out } => {
            let report = cmd_report(&results, &out)?;
            emit(&serde_json::json!({ "written": report.written }), None)
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("UsageError", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
