//! Core pipeline for dermoscopic lesion triage.
//!
//! The crate is organised the way a case flows through the system:
//!
//! - [`imaging`]: non-local means denoising, histogram equalization, resizing
//!   and training-time augmentation on normalized [`PixelImage`]s.
//! - [`datasetio`]: dataset manifests and stratified train/val/test splits.
//! - [`inference`]: classifier backends (ONNX model files and mocks).
//! - [`ensemble`]: majority voting with disagreement flagging.
//! - [`metrics`]: confusion matrices, precision/recall/F1, log loss, ROC/AUC.
//! - [`llmclient`]: chat-completion client with retries and a stub transport.
//! - [`reporting`]: prompt construction, report parsing, query safety gate,
//!   patient chat and rubric scoring.

pub mod datasetio;
pub mod ensemble;
pub mod imaging;
pub mod inference;
pub mod label;
pub mod llmclient;
pub mod metrics;
pub mod reporting;

pub use datasetio::{DatasetManifest, ManifestEntry, SplitSpec};
pub use ensemble::{ConsensusType, EnsembleDecision, VotingPolicy};
pub use imaging::{AugmentSpec, NlmParams, PixelImage, PreprocessConfig};
pub use inference::{BackendDescriptor, ClassProbabilities, Classifier, ModelPrediction};
pub use label::ClassLabel;
pub use llmclient::{ChatMessage, LlmClient, LlmConfig, Role};
pub use metrics::{ConfusionMatrix, LabeledPrediction, MetricsReport};
pub use reporting::{AssessmentReport, ReportRequest, RubricScore, DISCLAIMER};
