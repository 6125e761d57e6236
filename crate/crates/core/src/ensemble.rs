//! Majority voting with disagreement flagging.
//!
//! The final class is the one predicted by most members. A decision is
//! unanimous only when every member predicts it; anything less is flagged
//! for specialist review.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::inference::{ClassProbabilities, InferenceError, ModelPrediction};
use crate::label::ClassLabel;

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusType {
    Unanimous,
    DisagreementFlagged,
}

impl ConsensusType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsensusType::Unanimous => "unanimous",
            ConsensusType::DisagreementFlagged => "disagreement_flagged",
        }
    }
}

impl std::fmt::Display for ConsensusType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub final_class: ClassLabel,
    /// Vote count per class; classes with no votes are omitted.
    pub votes: BTreeMap<ClassLabel, usize>,
    pub consensus: ConsensusType,
    /// Mean over members of each member's probability for `final_class`.
    pub confidence: f64,
    pub needs_review: bool,
    pub member_predictions: Vec<ModelPrediction>,
}

impl EnsembleDecision {
    pub fn votes_for(&self, label: ClassLabel) -> usize {
        self.votes.get(&label).copied().unwrap_or(0)
    }
}

/// Ensemble size accepted by [`VotingPolicy::vote`]; must be odd and at least 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingPolicy {
    ensemble_size: usize,
}

impl Default for VotingPolicy {
    fn default() -> Self {
        Self { ensemble_size: 3 }
    }
}

impl VotingPolicy {
    pub fn new(ensemble_size: usize) -> Result<Self, EnsembleError> {
        if ensemble_size < 3 || ensemble_size % 2 == 0 {
            return Err(EnsembleError::Config(format!(
                "ensemble size must be odd and at least 3, got {ensemble_size}"
            )));
        }
        Ok(Self { ensemble_size })
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn vote(&self, predictions: &[ModelPrediction]) -> Result<EnsembleDecision, EnsembleError> {
        if predictions.len() != self.ensemble_size {
            return Err(EnsembleError::Config(format!(
                "expected {} predictions, got {}",
                self.ensemble_size,
                predictions.len()
            )));
        }
        let mut ids = HashSet::new();
        for p in predictions {
            if !ids.insert(p.model_id.as_str()) {
                return Err(EnsembleError::Config(format!("duplicate model_id `{}`", p.model_id)));
            }
        }

        let mut counts = [0usize; 2];
        for p in predictions {
            counts[p.predicted.index()] += 1;
        }
        // Strict comparison keeps NV on a tie, which odd sizes rule out anyway.
        let final_class = if counts[ClassLabel::Bcc.index()] > counts[ClassLabel::Nv.index()] {
            ClassLabel::Bcc
        } else {
            ClassLabel::Nv
        };
        let unanimous = counts[final_class.index()] == predictions.len();
        let consensus = if unanimous {
            ConsensusType::Unanimous
        } else {
            ConsensusType::DisagreementFlagged
        };
        let confidence = (predictions.iter().map(|p| p.probs.get(final_class)).sum::<f64>() / predictions.len() as f64)
            .clamp(0.0, 1.0);
        let votes = ClassLabel::ALL
            .into_iter()
            .filter(|l| counts[l.index()] > 0)
            .map(|l| (l, counts[l.index()]))
            .collect();

        Ok(EnsembleDecision {
            final_class,
            votes,
            consensus,
            confidence,
            needs_review: !unanimous,
            member_predictions: predictions.to_vec(),
        })
    }
}

/// Majority vote with the default three-member policy.
pub fn vote(predictions: &[ModelPrediction]) -> Result<EnsembleDecision, EnsembleError> {
    VotingPolicy::default().vote(predictions)
}

/// Per-class arithmetic mean of member distributions.
pub fn average_distribution(predictions: &[ModelPrediction]) -> Result<ClassProbabilities, EnsembleError> {
    if predictions.is_empty() {
        return Err(EnsembleError::Input("no predictions to average".into()));
    }
    let n = predictions.len() as f64;
    let mut sums = [0.0; 2];
    for p in predictions {
        for label in ClassLabel::ALL {
            sums[label.index()] += p.probs.get(label);
        }
    }
    ClassProbabilities::from_scores(sums[0] / n, sums[1] / n)
        .map_err(|e: InferenceError| EnsembleError::Input(e.to_string()))
}
