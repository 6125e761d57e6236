//! Dataset manifests and stratified splitting.
//!
//! A manifest is a UTF-8 text file with one `path,label` record per line.
//! Labels are `NV` or `BCC`; blank lines and lines starting with `#` are
//! ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::ClassLabel;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: unknown label token `{token}`")]
    UnknownLabel { line: usize, token: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate image path `{path}`")]
    DuplicatePath { path: String },
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.image_path.as_str()) {
                return Err(DatasetError::DuplicatePath {
                    path: e.image_path.clone(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn classes(&self) -> [ClassLabel; 2] {
        ClassLabel::ALL
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (path, token) = trimmed.rsplit_once(',').ok_or_else(|| DatasetError::Malformed {
                line,
                message: "expected `path,label`".into(),
            })?;
            let path = path.trim();
            if path.is_empty() {
                return Err(DatasetError::Malformed {
                    line,
                    message: "empty image path".into(),
                });
            }
            let label = token.parse().map_err(|_| DatasetError::UnknownLabel {
                line,
                token: token.trim().to_string(),
            })?;
            entries.push(ManifestEntry {
                image_path: path.to_string(),
                label,
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{},{}", e.image_path, e.label);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    DatasetManifest::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            val_fraction: 0.1,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(DatasetError::InvalidSplit("fractions must be non-negative".into()));
        }
        if fractions.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(DatasetError::InvalidSplit("fractions sum above 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
}

// Guards against products like 0.29 * 100 = 28.999999999999996.
fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Per-class sizes `(train, val, test)` for a class with `n` entries.
///
/// Val and test take `floor(fraction * n)`; train takes its floor plus
/// whatever flooring left over.
pub fn split_counts(spec: &SplitSpec, n: usize) -> (usize, usize, usize) {
    let val = floor_count(spec.val_fraction, n);
    let test = floor_count(spec.test_fraction, n);
    let train = n - val - test;
    (train, val, test)
}

/// Stratified train/val/test split, shuffled within each class by `spec.seed`.
pub fn stratified_split(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<DatasetSplit, DatasetError> {
    spec.validate()?;
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for label in ClassLabel::ALL {
        let mut members: Vec<ManifestEntry> = manifest.entries.iter().filter(|e| e.label == label).cloned().collect();
        if members.is_empty() {
            tracing::warn!(class = %label, "class has no entries; it will be empty in every subset");
            continue;
        }
        members.shuffle(&mut rng);
        let (_, n_val, n_test) = split_counts(spec, members.len());
        let mut rest = members.into_iter();
        val.extend(rest.by_ref().take(n_val));
        test.extend(rest.by_ref().take(n_test));
        train.extend(rest);
    }
    Ok(DatasetSplit {
        train: DatasetManifest { entries: train },
        val: DatasetManifest { entries: val },
        test: DatasetManifest { entries: test },
    })
}
