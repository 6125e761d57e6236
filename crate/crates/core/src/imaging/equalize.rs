use super::{ImagingError, PixelImage};

const BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    (v * 255.0).round().clamp(0.0, 255.0) as usize
}

/// Per-channel histogram equalization over 256 bins.
///
/// Each value maps to `(cdf(bin) - cdf_min) / (N - cdf_min)` where `N` is
/// the pixel count and `cdf_min` the CDF at the lowest occupied bin. A
/// channel with a single occupied bin maps to zero.
pub fn equalize_histogram(img: &PixelImage) -> Result<PixelImage, ImagingError> {
    if img.is_empty() {
        return Err(ImagingError::Input("zero-sized image".into()));
    }
    let channels = img.channels();
    let n = img.width() * img.height();
    let mut out = img.data().to_vec();

    for c in 0..channels {
        let mut hist = [0usize; BINS];
        for v in img.data().iter().skip(c).step_by(channels) {
            hist[bin_of(*v)] += 1;
        }
        let mut cdf = [0usize; BINS];
        let mut running = 0;
        for (slot, count) in cdf.iter_mut().zip(hist) {
            running += count;
            *slot = running;
        }
        let cdf_min = hist
            .iter()
            .zip(cdf)
            .find(|(count, _)| **count > 0)
            .map(|(_, c)| c)
            .unwrap_or(0);
        let denom = (n - cdf_min) as f64;
        for v in out.iter_mut().skip(c).step_by(channels) {
            *v = if denom == 0.0 {
                0.0
            } else {
                ((cdf[bin_of(*v)] - cdf_min) as f64 / denom).clamp(0.0, 1.0)
            };
        }
    }
    Ok(PixelImage::from_raw(img.width(), img.height(), channels, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_maps_to_zero() {
        let img = PixelImage::constant(4, 3, 3, 0.7).unwrap();
        let out = equalize_histogram(&img).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn four_pixel_hand_cdf() {
        // Bins 0, 64, 128, 255 -> cdf 1, 2, 3, 4; cdf_min = 1, N = 4.
        let img = PixelImage::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let out = equalize_histogram(&img).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_histogram_is_identity() {
        let img = PixelImage::from_fn(16, 16, 1, |x, y, _| (y * 16 + x) as f64 / 255.0).unwrap();
        let out = equalize_histogram(&img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn channels_are_independent() {
        let img = PixelImage::from_fn(2, 1, 3, |x, _, c| if c == 1 { 0.4 } else { x as f64 }).unwrap();
        let out = equalize_histogram(&img).unwrap();
        assert_eq!(out.plane(1), vec![0.0, 0.0]);
        assert_eq!(out.plane(0), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_empty() {
        let img = PixelImage::new(0, 3, 1, vec![]).unwrap();
        assert!(equalize_histogram(&img).is_err());
    }
}
