//! JSON-lines dataset manifests.
//!
//! The first line is a header object `{"name", "scale", "category"?}`; every
//! following non-blank line is one entry
//! `{"image_path", "mos", "sos"?, "dos"?, "raw_ratings"?}`. Image paths are
//! relative to the dataset root: `$IQA_DATASET_ROOT` when set, otherwise the
//! manifest's own directory.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating_stats::{
    dos_from_ratings, LabelCategory, OpinionDistribution, QualityScale, SampleLabels,
};

/// Environment variable naming the directory image paths are relative to.
pub const DATASET_ROOT_ENV: &str = "IQA_DATASET_ROOT";

/// Accepted deviation of a manifest DOS from unit mass.
pub const MANIFEST_DOS_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub name: String,
    pub scale: QualityScale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<LabelCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_path: String,
    pub mos: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dos: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_ratings: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub scale: QualityScale,
    pub category: LabelCategory,
    pub entries: Vec<ManifestEntry>,
    labels: Vec<SampleLabels>,
    /// Directory the manifest was read from, if any.
    base_dir: Option<PathBuf>,
}

fn infer_category(entry: &ManifestEntry) -> LabelCategory {
    if entry.dos.is_some() || entry.raw_ratings.is_some() {
        LabelCategory::DosAvailable
    } else if entry.sos.is_some() {
        LabelCategory::MosSosAvailable
    } else {
        LabelCategory::MosOnly
    }
}

fn entry_labels(
    entry: &ManifestEntry,
    category: LabelCategory,
    scale: &QualityScale,
) -> std::result::Result<SampleLabels, String> {
    let has_dos = entry.dos.is_some() || entry.raw_ratings.is_some();
    let consistent = match category {
        LabelCategory::DosAvailable => has_dos,
        LabelCategory::MosSosAvailable => entry.sos.is_some() && !has_dos,
        LabelCategory::MosOnly => entry.sos.is_none() && !has_dos,
    };
    if !consistent {
        return Err(format!(
            "labels present (mos{}{}) do not match category {category}",
            if entry.sos.is_some() { ", sos" } else { "" },
            if has_dos { ", dos" } else { "" },
        ));
    }
    let mut dos = None;
    if let Some(probs) = &entry.dos {
        let sum: f64 = probs.iter().sum();
        let d = OpinionDistribution::with_tolerance(probs.clone(), scale, MANIFEST_DOS_SUM_TOL)
            .map_err(|e| e.to_string())?;
        let normalised = d.into_probs().into_iter().map(|p| p / sum).collect();
        dos = Some(OpinionDistribution::new(normalised, scale).map_err(|e| e.to_string())?);
    }
    if let Some(ratings) = &entry.raw_ratings {
        let hist = dos_from_ratings(ratings, scale).map_err(|e| e.to_string())?;
        match &dos {
            Some(d) if d.probs().iter().zip(hist.probs()).any(|(a, b)| (a - b).abs() > MANIFEST_DOS_SUM_TOL) => {
                return Err("dos disagrees with the histogram of raw_ratings".into())
            }
            Some(_) => {}
            None => dos = Some(hist),
        }
    }
    SampleLabels::new(category, entry.mos, entry.sos, dos, scale).map_err(|e| e.to_string())
}

impl DatasetManifest {
    /// Validates entries against the category (inferred from the first entry
    /// when `category` is `None`).
    pub fn new(
        name: impl Into<String>,
        scale: QualityScale,
        category: Option<LabelCategory>,
        entries: Vec<ManifestEntry>,
    ) -> Result<Self> {
        scale.validate()?;
        let category = category
            .or_else(|| entries.first().map(infer_category))
            .unwrap_or(LabelCategory::MosOnly);
        let labels = entries
            .iter()
            .map(|e| {
                entry_labels(e, category, &scale).map_err(|message| Error::Validation {
                    entry: e.image_path.clone(),
                    message,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetManifest {
            name: name.into(),
            scale,
            category,
            entries,
            labels,
            base_dir: None,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> &[SampleLabels] {
        &self.labels
    }

    pub fn header(&self) -> ManifestHeader {
        ManifestHeader {
            name: self.name.clone(),
            scale: self.scale.clone(),
            category: Some(self.category),
        }
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    /// Directory that relative image paths resolve against.
    pub fn root(&self) -> PathBuf {
        match std::env::var_os(DATASET_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => self.base_dir.clone().unwrap_or_default(),
        }
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.root().join(&self.entries[index].image_path)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serialises");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serialises"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header: Option<ManifestHeader> = None;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?);
        } else {
            entries.push(serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?);
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header line".into()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(DatasetManifest::new(header.name, header.scale, header.category, entries)?.with_base_dir(base))
}
