//! Deterministic image preprocessing.
//!
//! Every operation here is a pure function over [`PixelImage`], an
//! interleaved row-major buffer of `f64` intensities in `[0, 1]`.

mod augment;
mod equalize;
mod io;
mod nlm;
mod pipeline;
mod resize;

pub use augment::{augment, AugmentSpec};
pub use equalize::equalize_histogram;
pub use io::{decode_image, load_image, save_image, sniff_format, ImageFormat};
pub use nlm::{denoise_nlm, pixel_weights, NlmParams};
pub use pipeline::{preprocess, PreprocessConfig};
pub use resize::resize;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("invalid image: {0}")]
    Input(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// H x W x C image with interleaved channels and intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PixelImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if channels != 1 && channels != 3 {
            return Err(ImagingError::Input(format!("channels must be 1 or 3, got {channels}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| ImagingError::Input("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(ImagingError::Input(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::Input(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self, ImagingError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from `f(x, y, channel)`; values are clamped into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    // Callers inside the crate guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Reads with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc, c)
    }

    /// Extracts one channel as a `width * height` plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub(crate) fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Self {
        let channels = planes.len();
        let mut data = vec![0.0; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + c] = *v;
            }
        }
        Self::from_raw(width, height, channels, data)
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, self.channels, |x, y, c| {
            self.get(self.width - 1 - x, y, c)
        })
        .expect("flip preserves invariants")
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, self.channels, |x, y, c| {
            self.get(x, self.height - 1 - y, c)
        })
        .expect("flip preserves invariants")
    }

    /// Replicates a grayscale image into three channels; RGB is returned as is.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        Self::from_fn(self.width, self.height, 3, |x, y, _| self.get(x, y, 0))
            .expect("replication preserves invariants")
    }

    /// 8-bit quantization used for hashing and encoding.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Hex SHA-256 over the dimensions and the 8-bit quantized content.
    ///
    /// Used as the lookup key of mock classifier tables.
    pub fn content_key(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.height as u64).to_le_bytes());
        hasher.update((self.channels as u64).to_le_bytes());
        hasher.update(self.to_u8());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(PixelImage::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(PixelImage::new(1, 1, 2, vec![0.0; 2]).is_err());
        assert!(PixelImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(PixelImage::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(PixelImage::new(0, 0, 1, vec![]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_edges() {
        let img = PixelImage::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        assert_eq!(img.get_clamped(-3, 0, 0), 0.25);
        assert_eq!(img.get_clamped(5, 4, 0), 0.75);
    }

    #[test]
    fn planes_round_trip() {
        let img = PixelImage::from_fn(3, 2, 3, |x, y, c| (x + 3 * y + 6 * c) as f64 / 20.0).unwrap();
        let planes: Vec<_> = (0..3).map(|c| img.plane(c)).collect();
        assert_eq!(PixelImage::from_planes(3, 2, &planes), img);
    }

    #[test]
    fn content_key_depends_on_shape_and_content() {
        let a = PixelImage::constant(2, 2, 1, 0.5).unwrap();
        let b = PixelImage::constant(4, 1, 1, 0.5).unwrap();
        let c = PixelImage::constant(2, 2, 1, 0.6).unwrap();
        assert_ne!(a.content_key(), b.content_key());
        assert_ne!(a.content_key(), c.content_key());
        assert_eq!(a.content_key(), a.clone().content_key());
        assert_eq!(a.content_key().len(), 64);
    }
}
