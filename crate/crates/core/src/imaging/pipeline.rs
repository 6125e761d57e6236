use serde::{Deserialize, Serialize};

use super::{denoise_nlm, equalize_histogram, resize, ImagingError, NlmParams, PixelImage};

/// Inference-time preprocessing: denoise, equalize, resize, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub denoise: bool,
    pub equalize: bool,
    pub nlm: NlmParams,
    pub width: usize,
    pub height: usize,
    /// Replicate grayscale input into three channels.
    pub force_rgb: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            denoise: true,
            equalize: true,
            nlm: NlmParams::default(),
            width: 224,
            height: 224,
            force_rgb: true,
        }
    }
}

pub fn preprocess(img: &PixelImage, config: &PreprocessConfig) -> Result<PixelImage, ImagingError> {
    if img.is_empty() {
        return Err(ImagingError::Input("zero-sized image".into()));
    }
    let mut out = if config.denoise {
        denoise_nlm(img, &config.nlm)?
    } else {
        img.clone()
    };
    if config.equalize {
        out = equalize_histogram(&out)?;
    }
    out = resize(&out, config.width, config.height)?;
    if config.force_rgb {
        out = out.to_rgb();
    }
    Ok(out)
}
