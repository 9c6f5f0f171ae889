//! Training, evaluation, ablation, calibration and reporting entry points.

pub mod ablate;
pub mod calibrate;
pub mod config;
pub mod eval;
pub mod report;
pub mod train;

pub use ablate::{cmd_ablate, run_ablation, run_variant, AblationAxis, AblationRow, AblationSpec, AblationTable, Variant};
pub use calibrate::{calibrate_manifest, cmd_calibrate_a, CalibrationReport, SosSource};
pub use config::{BackboneKind, OptimizerConfig, OptimizerKind, RunConfig, SplitParams, TrainSubset};
pub use eval::{cmd_eval, evaluate_indices, evaluate_model, EvalReport, EvalSubset};
pub use report::{bar_chart_svg, cmd_report, Report};
pub use train::{cmd_train, train_model, EpochLoss, LoadedDataset, TrainArtifacts, TrainOutcome};
