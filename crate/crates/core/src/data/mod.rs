pub mod manifest;
pub mod preprocess;
pub mod splits;
pub mod synth;

pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, ManifestHeader, DATASET_ROOT_ENV};
pub use preprocess::{load_image, preprocess, PreprocessSpec};
pub use splits::{make_splits, make_splits_with, Split, SplitPlan};
pub use synth::{generate_synthetic_dataset, load_oracle, OracleLabels, SyntheticDataset};
