use serde::{Deserialize, Serialize};

use super::{LabeledPrediction, MetricsError};
use crate::inference::ClassProbabilities;
use crate::label::ClassLabel;

/// One row of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub prediction: LabeledPrediction,
}

/// Parses `sample_id,truth,p_nv,p_bcc` rows.
///
/// Blank lines and `#` comments are skipped, as is a leading header row
/// whose first field is `sample_id`. Errors carry the 1-based line number.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, MetricsError> {
    let mut records = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !seen_data && fields.first() == Some(&"sample_id") {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let err = |message: String| MetricsError::Parse { line, message };
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 fields (sample_id,truth,p_nv,p_bcc), found {}",
                fields.len()
            )));
        }
        let truth: ClassLabel = fields[1].parse().map_err(|e| err(format!("{e}")))?;
        let prob = |s: &str| s.parse::<f64>().map_err(|_| err(format!("invalid probability `{s}`")));
        let probs = ClassProbabilities::new(prob(fields[2])?, prob(fields[3])?).map_err(|e| err(e.to_string()))?;
        records.push(PredictionRecord {
            sample_id: fields[0].to_string(),
            prediction: LabeledPrediction::new(truth, probs),
        });
    }
    Ok(records)
}
