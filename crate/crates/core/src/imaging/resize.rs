use super::{ImagingError, PixelImage};

/// Bilinear sample at continuous source coordinates with edge replication.
pub(crate) fn sample_bilinear(img: &PixelImage, sx: f64, sy: f64, c: usize) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let p00 = img.get_clamped(x0, y0, c);
    let p10 = img.get_clamped(x0 + 1, y0, c);
    let p01 = img.get_clamped(x0, y0 + 1, c);
    let p11 = img.get_clamped(x0 + 1, y0 + 1, c);
    let top = p00 + (p10 - p00) * fx;
    let bottom = p01 + (p11 - p01) * fx;
    (top + (bottom - top) * fy).clamp(0.0, 1.0)
}

/// Bilinear resize using pixel-centre alignment.
///
/// Destination pixel `d` samples source coordinate `(d + 0.5) * src / dst - 0.5`,
/// clamped to the image, so equal sizes reproduce the input exactly.
pub fn resize(img: &PixelImage, target_w: usize, target_h: usize) -> Result<PixelImage, ImagingError> {
    if target_w == 0 || target_h == 0 {
        return Err(ImagingError::Parameter(format!(
            "target size {target_w}x{target_h} must be at least 1x1"
        )));
    }
    if img.is_empty() {
        return Err(ImagingError::Input("zero-sized image".into()));
    }
    if target_w == img.width() && target_h == img.height() {
        return Ok(img.clone());
    }
    let scale_x = img.width() as f64 / target_w as f64;
    let scale_y = img.height() as f64 / target_h as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    PixelImage::from_fn(target_w, target_h, img.channels(), |x, y, c| {
        let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, max_x);
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, max_y);
        sample_bilinear(img, sx, sy, c)
    })
}
