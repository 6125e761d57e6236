use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendDescriptor, ClassProbabilities, Classifier, InferenceError, InputShape};
use crate::imaging::PixelImage;
use crate::label::ClassLabel;

/// Mock behaviour file.
///
/// ```toml
/// fallback = [0.5, 0.5]          # NV, BCC; used when no entry matches
/// [entries]
/// "<content key>" = [0.92, 0.08]
/// [pseudo]                        # optional seeded pseudo-classifier
/// seed = 1
/// error_rate = 0.08
/// ```
///
/// Lookup order: `entries` by [`PixelImage::content_key`], then `pseudo`,
/// then `fallback`. Setting `error` makes every call fail.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub fallback: Option<[f64; 2]>,
    #[serde(default)]
    pub entries: HashMap<String, [f64; 2]>,
    #[serde(default)]
    pub pseudo: Option<PseudoClassifier>,
}

/// Seeded stand-in for a trained network with a known error rate.
///
/// The latent class is BCC when the mean intensity is at least `threshold`,
/// NV otherwise. A uniform draw keyed on `(seed, image content)` flips the
/// latent class with probability `error_rate` (or the per-class override).
/// The reported confidence is `sigmoid(gain * |mean - threshold| + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoClassifier {
    pub seed: u64,
    pub error_rate: f64,
    #[serde(default)]
    pub error_rate_nv: Option<f64>,
    #[serde(default)]
    pub error_rate_bcc: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_bias")]
    pub bias: f64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_gain() -> f64 {
    8.0
}

fn default_bias() -> f64 {
    2.0
}

impl PseudoClassifier {
    pub fn new(seed: u64, error_rate: f64) -> Self {
        Self {
            seed,
            error_rate,
            error_rate_nv: None,
            error_rate_bcc: None,
            threshold: default_threshold(),
            gain: default_gain(),
            bias: default_bias(),
        }
    }

    pub fn error_rate_for(&self, label: ClassLabel) -> f64 {
        match label {
            ClassLabel::Nv => self.error_rate_nv.unwrap_or(self.error_rate),
            ClassLabel::Bcc => self.error_rate_bcc.unwrap_or(self.error_rate),
        }
    }

    /// Class implied by the image content before error injection.
    pub fn latent_class(&self, img: &PixelImage) -> ClassLabel {
        if mean_intensity(img) >= self.threshold {
            ClassLabel::Bcc
        } else {
            ClassLabel::Nv
        }
    }

    fn uniform_draw(&self, img: &PixelImage) -> f64 {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(img.content_key().as_bytes());
        let digest = hasher.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn classify(&self, img: &PixelImage) -> ClassProbabilities {
        let mean = mean_intensity(img);
        let latent = self.latent_class(img);
        let predicted = if self.uniform_draw(img) < self.error_rate_for(latent) {
            latent.other()
        } else {
            latent
        };
        let z = self.gain * (mean - self.threshold).abs() + self.bias;
        let confidence = 1.0 / (1.0 + (-z).exp());
        let mut p = [0.0; 2];
        p[predicted.index()] = confidence;
        p[predicted.other().index()] = 1.0 - confidence;
        ClassProbabilities::from_scores(p[0], p[1]).expect("sigmoid output is a valid distribution")
    }

    fn validate(&self) -> Result<(), InferenceError> {
        for rate in [Some(self.error_rate), self.error_rate_nv, self.error_rate_bcc]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(InferenceError::Config(format!("error rate {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn mean_intensity(img: &PixelImage) -> f64 {
    if img.is_empty() {
        return 0.0;
    }
    img.data().iter().sum::<f64>() / img.data().len() as f64
}

impl MockConfig {
    pub fn parse(text: &str) -> Result<Self, InferenceError> {
        toml::from_str(text).map_err(|e| InferenceError::Config(format!("mock table: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, InferenceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InferenceError::Config(format!("cannot read mock table {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    model_id: String,
    input_shape: InputShape,
    error: Option<String>,
    fallback: ClassProbabilities,
    entries: HashMap<String, ClassProbabilities>,
    pseudo: Option<PseudoClassifier>,
}

impl MockBackend {
    pub fn new(
        model_id: impl Into<String>,
        input_shape: InputShape,
        config: MockConfig,
    ) -> Result<Self, InferenceError> {
        let pair = |p: [f64; 2]| ClassProbabilities::new(p[0], p[1]);
        let fallback = match config.fallback {
            Some(p) => pair(p)?,
            None => ClassProbabilities::new(0.5, 0.5)?,
        };
        let entries = config
            .entries
            .into_iter()
            .map(|(k, p)| Ok((k.to_ascii_lowercase(), pair(p)?)))
            .collect::<Result<_, InferenceError>>()?;
        if let Some(pseudo) = &config.pseudo {
            pseudo.validate()?;
        }
        Ok(Self {
            model_id: model_id.into(),
            input_shape,
            error: config.error,
            fallback,
            entries,
            pseudo: config.pseudo,
        })
    }

    /// Mock that always returns `probs`.
    pub fn fixed(model_id: impl Into<String>, input_shape: InputShape, probs: ClassProbabilities) -> Self {
        let [nv, bcc] = probs.as_array();
        Self::new(
            model_id,
            input_shape,
            MockConfig {
                fallback: Some([nv, bcc]),
                ..MockConfig::default()
            },
        )
        .expect("valid fixed distribution")
    }

    pub fn from_descriptor(desc: &BackendDescriptor) -> Result<Self, InferenceError> {
        let config = MockConfig::load(&desc.source)?;
        Self::new(desc.model_id.clone(), desc.input_shape, config)
    }
}

impl Classifier for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn input_shape(&self) -> InputShape {
        self.input_shape
    }

    fn classify(&self, img: &PixelImage) -> Result<ClassProbabilities, InferenceError> {
        if let Some(message) = &self.error {
            return Err(InferenceError::Backend {
                model_id: self.model_id.clone(),
                message: message.clone(),
            });
        }
        if !self.entries.is_empty() {
            if let Some(p) = self.entries.get(&img.content_key()) {
                return Ok(*p);
            }
        }
        Ok(match &self.pseudo {
            Some(pseudo) => pseudo.classify(img),
            None => self.fallback,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::predict;

    fn shape(n: usize) -> InputShape {
        InputShape {
            height: n,
            width: n,
            channels: 3,
        }
    }

    #[test]
    fn table_lookup_by_content_key() {
        let img = PixelImage::constant(4, 4, 3, 0.3).unwrap();
        let toml = format!(
            "fallback = [0.5, 0.5]\n[entries]\n\"{}\" = [0.92, 0.08]\n",
            img.content_key()
        );
        let backend = MockBackend::new("m", shape(4), MockConfig::parse(&toml).unwrap()).unwrap();
        let pred = predict(&backend, &img).unwrap();
        assert_eq!(pred.predicted, ClassLabel::Nv);
        assert_eq!(pred.probs, ClassProbabilities::new(0.92, 0.08).unwrap());

        let other = PixelImage::constant(4, 4, 3, 0.9).unwrap();
        assert_eq!(predict(&backend, &other).unwrap().probs.get(ClassLabel::Nv), 0.5);
    }

    #[test]
    fn half_half_predicts_nv() {
        let backend = MockBackend::fixed("m", shape(2), ClassProbabilities::new(0.5, 0.5).unwrap());
        let img = PixelImage::constant(2, 2, 3, 0.1).unwrap();
        assert_eq!(predict(&backend, &img).unwrap().predicted, ClassLabel::Nv);
    }

    #[test]
    fn shape_mismatch() {
        let backend = MockBackend::fixed("m", shape(2), ClassProbabilities::certain(ClassLabel::Bcc));
        let img = PixelImage::constant(3, 3, 3, 0.1).unwrap();
        assert!(matches!(predict(&backend, &img), Err(InferenceError::Shape { .. })));
    }

    #[test]
    fn error_injection() {
        let cfg = MockConfig::parse("error = \"weights corrupted\"").unwrap();
        let backend = MockBackend::new("densenet", shape(2), cfg).unwrap();
        let err = predict(&backend, &PixelImage::constant(2, 2, 3, 0.1).unwrap()).unwrap_err();
        assert_eq!(err.model_id(), Some("densenet"));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(MockConfig::parse("fallback = [0.9, 0.9]")
            .and_then(|c| MockBackend::new("m", shape(2), c))
            .is_err());
        assert!(MockConfig::parse("unknown = 1").is_err());
        assert!(MockConfig::parse("[pseudo]\nseed = 1\nerror_rate = 2.0")
            .and_then(|c| MockBackend::new("m", shape(2), c))
            .is_err());
    }

    #[test]
    fn pseudo_zero_error_follows_latent_class() {
        let pseudo = PseudoClassifier::new(3, 0.0);
        let dark = PixelImage::constant(4, 4, 3, 0.2).unwrap();
        let bright = PixelImage::constant(4, 4, 3, 0.8).unwrap();
        assert_eq!(pseudo.classify(&dark).argmax(), ClassLabel::Nv);
        assert_eq!(pseudo.classify(&bright).argmax(), ClassLabel::Bcc);
        let always_wrong = PseudoClassifier::new(3, 1.0);
        assert_eq!(always_wrong.classify(&bright).argmax(), ClassLabel::Nv);
    }

    #[test]
    fn pseudo_is_deterministic() {
        let pseudo = PseudoClassifier::new(11, 0.3);
        let img = PixelImage::from_fn(4, 4, 3, |x, y, c| ((x + y + c) % 5) as f64 / 4.0).unwrap();
        assert_eq!(pseudo.classify(&img), pseudo.classify(&img));
    }
}
