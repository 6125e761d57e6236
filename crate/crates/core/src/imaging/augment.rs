use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::resize::sample_bilinear;
use super::{ImagingError, PixelImage};

/// Training-time augmentation settings.
///
/// Transforms fire independently with `per_transform_probability`, always
/// in the order rotation, horizontal flip, vertical flip, zoom, brightness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    /// Maximum absolute rotation in degrees.
    pub rotation_max: f64,
    pub zoom_range: (f64, f64),
    /// Additive brightness shift bound, as a fraction of full scale.
    pub brightness_delta: f64,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    pub per_transform_probability: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotation_max: 30.0,
            zoom_range: (0.8, 1.2),
            brightness_delta: 0.20,
            flip_horizontal: true,
            flip_vertical: true,
            per_transform_probability: 0.5,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let (lo, hi) = self.zoom_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ImagingError::Parameter(format!(
                "zoom range ({lo}, {hi}) must satisfy 0 < low <= high"
            )));
        }
        if !(0.0..=1.0).contains(&self.per_transform_probability) {
            return Err(ImagingError::Parameter(format!(
                "per_transform_probability {} outside [0, 1]",
                self.per_transform_probability
            )));
        }
        if !(self.rotation_max >= 0.0 && self.rotation_max.is_finite()) {
            return Err(ImagingError::Parameter("rotation_max must be >= 0".into()));
        }
        if !(self.brightness_delta >= 0.0 && self.brightness_delta.is_finite()) {
            return Err(ImagingError::Parameter("brightness_delta must be >= 0".into()));
        }
        Ok(())
    }
}

/// Applies the seeded augmentation chain. Output size equals input size.
pub fn augment(img: &PixelImage, spec: &AugmentSpec) -> Result<PixelImage, ImagingError> {
    spec.validate()?;
    if img.is_empty() {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.per_transform_probability;
    let mut out = img.clone();

    if rng.random::<f64>() < p {
        let degrees = rng.random_range(-spec.rotation_max..=spec.rotation_max);
        if degrees != 0.0 {
            out = rotate(&out, degrees.to_radians());
        }
    }
    if rng.random::<f64>() < p && spec.flip_horizontal {
        out = out.flip_horizontal();
    }
    if rng.random::<f64>() < p && spec.flip_vertical {
        out = out.flip_vertical();
    }
    if rng.random::<f64>() < p {
        let (lo, hi) = spec.zoom_range;
        let factor = rng.random_range(lo..=hi);
        if factor != 1.0 {
            out = zoom(&out, factor);
        }
    }
    if rng.random::<f64>() < p {
        let delta = rng.random_range(-spec.brightness_delta..=spec.brightness_delta);
        if delta != 0.0 {
            let data = out.data().iter().map(|v| (v + delta).clamp(0.0, 1.0)).collect();
            out = PixelImage::from_raw(out.width(), out.height(), out.channels(), data);
        }
    }
    Ok(out)
}

fn centre(img: &PixelImage) -> (f64, f64) {
    ((img.width() as f64 - 1.0) / 2.0, (img.height() as f64 - 1.0) / 2.0)
}

/// Counter-clockwise rotation about the image centre.
fn rotate(img: &PixelImage, radians: f64) -> PixelImage {
    let (cx, cy) = centre(img);
    let (sin, cos) = radians.sin_cos();
    PixelImage::from_fn(img.width(), img.height(), img.channels(), |x, y, c| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        sample_bilinear(img, sx, sy, c)
    })
    .expect("rotation preserves invariants")
}

/// Factor above one crops into the centre; below one pads by edge replication.
fn zoom(img: &PixelImage, factor: f64) -> PixelImage {
    let (cx, cy) = centre(img);
    PixelImage::from_fn(img.width(), img.height(), img.channels(), |x, y, c| {
        let sx = cx + (x as f64 - cx) / factor;
        let sy = cy + (y as f64 - cy) / factor;
        sample_bilinear(img, sx, sy, c)
    })
    .expect("zoom preserves invariants")
}
