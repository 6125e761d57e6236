use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::{ImagingError, PixelImage};

/// Encodings accepted at the system boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }

    fn codec(self) -> image::ImageFormat {
        match self {
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        }
    }
}

/// Detects PNG or JPEG from magic bytes.
pub fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    match image::guess_format(bytes).ok()? {
        image::ImageFormat::Png => Some(ImageFormat::Png),
        image::ImageFormat::Jpeg => Some(ImageFormat::Jpeg),
        _ => None,
    }
}

fn from_dynamic(img: DynamicImage) -> PixelImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => {
            let gray = img.to_luma8();
            let data = gray.as_raw().iter().map(|v| *v as f64 / 255.0).collect();
            PixelImage::from_raw(w, h, 1, data)
        }
        other => {
            let rgb = other.to_rgb8();
            let data = rgb.as_raw().iter().map(|v| *v as f64 / 255.0).collect();
            PixelImage::from_raw(w, h, 3, data)
        }
    }
}

/// Decodes PNG or JPEG bytes; anything else is rejected.
pub fn decode_image(bytes: &[u8]) -> Result<PixelImage, ImagingError> {
    let format = sniff_format(bytes)
        .ok_or_else(|| ImagingError::Input("unsupported image format (expected PNG or JPEG)".into()))?;
    let img = image::load_from_memory_with_format(bytes, format.codec())?;
    Ok(from_dynamic(img))
}

pub fn load_image(path: &Path) -> Result<PixelImage, ImagingError> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes)
}

/// Writes an 8-bit PNG or JPEG, chosen by the file extension.
pub fn save_image(img: &PixelImage, path: &Path) -> Result<(), ImagingError> {
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => ImageFormat::Png,
        Some("jpg" | "jpeg") => ImageFormat::Jpeg,
        _ => {
            return Err(ImagingError::Parameter(format!(
                "cannot infer PNG/JPEG from {}",
                path.display()
            )))
        }
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = img.to_u8();
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer size matches"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer size matches"))
    };
    dynamic.save_with_format(path, format.codec())?;
    Ok(())
}
