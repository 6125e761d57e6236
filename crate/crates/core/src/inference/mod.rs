//! Classifier backends.
//!
//! A backend turns a preprocessed [`PixelImage`] into a [`ModelPrediction`].
//! Two kinds ship: ONNX model files (behind the `onnx` feature) and mock
//! backends driven by a TOML table, used for offline runs and simulation.

mod mock;
#[cfg(feature = "onnx")]
mod onnx;
mod roster;

pub use mock::{MockBackend, MockConfig, PseudoClassifier};
#[cfg(feature = "onnx")]
pub use onnx::OnnxBackend;
pub use roster::{load_roster, parse_roster, RosterFile};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imaging::PixelImage;
use crate::label::ClassLabel;

const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("input shape mismatch: backend expects {expected}, got {actual}")]
    Shape { expected: InputShape, actual: InputShape },
    #[error("invalid probabilities: {0}")]
    Probabilities(String),
    #[error("backend `{model_id}` failed: {message}")]
    Backend { model_id: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl InferenceError {
    /// Model id attached to a backend failure, if any.
    pub fn model_id(&self) -> Option<&str> {
        match self {
            InferenceError::Backend { model_id, .. } => Some(model_id),
            _ => None,
        }
    }
}

/// Softmax output over `{NV, BCC}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbabilities", into = "RawProbabilities")]
pub struct ClassProbabilities([f64; 2]);

#[derive(Serialize, Deserialize)]
struct RawProbabilities {
    #[serde(rename = "NV")]
    nv: f64,
    #[serde(rename = "BCC")]
    bcc: f64,
}

impl TryFrom<RawProbabilities> for ClassProbabilities {
    type Error = InferenceError;

    fn try_from(raw: RawProbabilities) -> Result<Self, Self::Error> {
        ClassProbabilities::new(raw.nv, raw.bcc)
    }
}

impl From<ClassProbabilities> for RawProbabilities {
    fn from(p: ClassProbabilities) -> Self {
        RawProbabilities {
            nv: p.0[0],
            bcc: p.0[1],
        }
    }
}

impl ClassProbabilities {
    pub fn new(nv: f64, bcc: f64) -> Result<Self, InferenceError> {
        for p in [nv, bcc] {
            if !(0.0..=1.0).contains(&p) {
                return Err(InferenceError::Probabilities(format!("{p} outside [0, 1]")));
            }
        }
        if (nv + bcc - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(InferenceError::Probabilities(format!(
                "probabilities sum to {} instead of 1",
                nv + bcc
            )));
        }
        Ok(Self([nv, bcc]))
    }

    /// Normalizes non-negative scores onto the simplex.
    pub fn from_scores(nv: f64, bcc: f64) -> Result<Self, InferenceError> {
        let (nv, bcc) = (nv.max(0.0), bcc.max(0.0));
        let total = nv + bcc;
        if !(total.is_finite() && total > 0.0) {
            return Err(InferenceError::Probabilities(format!(
                "cannot normalize scores ({nv}, {bcc})"
            )));
        }
        Ok(Self([nv / total, bcc / total]))
    }

    /// Softmax over raw logits.
    pub fn from_logits(nv: f64, bcc: f64) -> Result<Self, InferenceError> {
        let m = nv.max(bcc);
        Self::from_scores((nv - m).exp(), (bcc - m).exp())
    }

    /// Point mass on `label`.
    pub fn certain(label: ClassLabel) -> Self {
        let mut p = [0.0; 2];
        p[label.index()] = 1.0;
        Self(p)
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> [f64; 2] {
        self.0
    }

    /// Most probable class; ties go to the first class (NV).
    pub fn argmax(&self) -> ClassLabel {
        if self.0[1] > self.0[0] {
            ClassLabel::Bcc
        } else {
            ClassLabel::Nv
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    pub model_id: String,
    pub probs: ClassProbabilities,
    pub predicted: ClassLabel,
}

impl ModelPrediction {
    pub fn new(model_id: impl Into<String>, probs: ClassProbabilities) -> Self {
        Self {
            model_id: model_id.into(),
            predicted: probs.argmax(),
            probs,
        }
    }
}

/// Height x width x channels expected by a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Default for InputShape {
    fn default() -> Self {
        Self {
            height: 224,
            width: 224,
            channels: 3,
        }
    }
}

impl InputShape {
    pub fn of(img: &PixelImage) -> Self {
        Self {
            height: img.height(),
            width: img.width(),
            channels: img.channels(),
        }
    }
}

impl std::fmt::Display for InputShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ModelFile,
    Mock,
}

/// Tensor layout fed to a model-file backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorLayout {
    #[default]
    Nhwc,
    Nchw,
}

/// What the model's first output holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    #[default]
    Probabilities,
    Logits,
}

/// Per-channel `(x - mean) / std` applied before a model-file forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNormalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub model_id: String,
    pub kind: BackendKind,
    pub source: PathBuf,
    #[serde(default)]
    pub input_shape: InputShape,
    /// Identity when absent.
    #[serde(default)]
    pub normalization: Option<ChannelNormalization>,
    #[serde(default)]
    pub layout: TensorLayout,
    #[serde(default)]
    pub output: OutputKind,
}

impl BackendDescriptor {
    pub fn mock(model_id: impl Into<String>, source: impl Into<PathBuf>) -> Self {
        Self {
            model_id: model_id.into(),
            kind: BackendKind::Mock,
            source: source.into(),
            input_shape: InputShape::default(),
            normalization: None,
            layout: TensorLayout::default(),
            output: OutputKind::default(),
        }
    }

    pub fn model_file(model_id: impl Into<String>, source: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::ModelFile,
            ..Self::mock(model_id, source)
        }
    }
}

/// A loaded, immutable classifier.
pub trait Classifier: Send + Sync + std::fmt::Debug {
    fn model_id(&self) -> &str;

    fn input_shape(&self) -> InputShape;

    /// Forward pass on an image already matching [`Classifier::input_shape`].
    fn classify(&self, img: &PixelImage) -> Result<ClassProbabilities, InferenceError>;
}

/// Loads the backend described by `desc`.
pub fn load_backend(desc: &BackendDescriptor) -> Result<Box<dyn Classifier>, InferenceError> {
    let wrap = |e: InferenceError| match e {
        e @ InferenceError::Backend { .. } => e,
        other => InferenceError::Backend {
            model_id: desc.model_id.clone(),
            message: other.to_string(),
        },
    };
    match desc.kind {
        BackendKind::Mock => Ok(Box::new(MockBackend::from_descriptor(desc).map_err(wrap)?)),
        #[cfg(feature = "onnx")]
        BackendKind::ModelFile => Ok(Box::new(OnnxBackend::load(desc).map_err(wrap)?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::ModelFile => Err(InferenceError::Backend {
            model_id: desc.model_id.clone(),
            message: "model-file backends require the `onnx` feature".into(),
        }),
    }
}

/// Loads every backend of a roster, rejecting duplicate model ids.
pub fn load_backends(descs: &[BackendDescriptor]) -> Result<Vec<Box<dyn Classifier>>, InferenceError> {
    roster::check_unique(descs)?;
    descs.iter().map(load_backend).collect()
}

/// Shape-checked prediction from one backend.
pub fn predict(backend: &dyn Classifier, img: &PixelImage) -> Result<ModelPrediction, InferenceError> {
    let expected = backend.input_shape();
    let actual = InputShape::of(img);
    if expected != actual {
        return Err(InferenceError::Shape { expected, actual });
    }
    let probs = backend.classify(img).map_err(|e| match e {
        e @ InferenceError::Backend { .. } => e,
        other => InferenceError::Backend {
            model_id: backend.model_id().to_string(),
            message: other.to_string(),
        },
    })?;
    Ok(ModelPrediction::new(backend.model_id(), probs))
}

/// Runs every backend (in parallel) and returns predictions in roster order.
///
/// The first failure aborts the call; shape errors are reported against the
/// failing backend's id as well.
pub fn predict_all(backends: &[Box<dyn Classifier>], img: &PixelImage) -> Result<Vec<ModelPrediction>, InferenceError> {
    if backends.is_empty() {
        return Err(InferenceError::Config("at least one backend is required".into()));
    }
    backends
        .par_iter()
        .map(|b| {
            predict(b.as_ref(), img).map_err(|e| match e {
                e @ InferenceError::Backend { .. } => e,
                other => InferenceError::Backend {
                    model_id: b.model_id().to_string(),
                    message: other.to_string(),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_validate_simplex() {
        assert!(ClassProbabilities::new(0.92, 0.08).is_ok());
        assert!(ClassProbabilities::new(0.9, 0.2).is_err());
        assert!(ClassProbabilities::new(-0.1, 1.1).is_err());
        assert!(ClassProbabilities::new(0.5, 0.5 + 5e-7).is_ok());
    }

    #[test]
    fn tie_goes_to_nv() {
        let p = ClassProbabilities::new(0.5, 0.5).unwrap();
        assert_eq!(p.argmax(), ClassLabel::Nv);
        assert_eq!(ModelPrediction::new("m", p).predicted, ClassLabel::Nv);
    }

    #[test]
    fn logits_softmax() {
        let p = ClassProbabilities::from_logits(0.0, (3.0f64).ln()).unwrap();
        assert!((p.get(ClassLabel::Bcc) - 0.75).abs() < 1e-12);
        let big = ClassProbabilities::from_logits(1000.0, 0.0).unwrap();
        assert_eq!(big.argmax(), ClassLabel::Nv);
    }

    #[test]
    fn serde_uses_label_keys() {
        let p = ClassProbabilities::new(0.92, 0.08).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"NV":0.92,"BCC":0.08}"#);
        let back: ClassProbabilities = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<ClassProbabilities>(r#"{"NV":0.9,"BCC":0.9}"#).is_err());
    }
}
