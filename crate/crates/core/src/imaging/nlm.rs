use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImagingError, PixelImage};

/// Non-local means parameters.
///
/// Patches are `(2 * patch_radius + 1)^2` pixels, the search window is
/// `(2 * search_radius + 1)^2` pixels centred on the output pixel and `h` is
/// the filter strength on the `[0, 1]` intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlmParams {
    pub patch_radius: usize,
    pub search_radius: usize,
    pub h: f64,
}

impl Default for NlmParams {
    fn default() -> Self {
        Self {
            patch_radius: 3,
            search_radius: 10,
            h: 0.1,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.search_radius < self.patch_radius {
            return Err(ImagingError::Parameter(format!(
                "search_radius {} smaller than patch_radius {}",
                self.search_radius, self.patch_radius
            )));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(ImagingError::Parameter(format!(
                "filter strength h must be positive and finite, got {}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Non-local means denoising, each channel independently.
///
/// `out(x) = sum_y w(x, y) I(y)` over the search window clipped to the
/// image, with `w(x, y) = exp(-|v_x - v_y|^2 / h^2) / Z`. Patch reads use
/// edge replication. Rows are filtered in parallel; every row is computed
/// in a fixed order so the result does not depend on the thread count.
///
/// Offsets `(+d, -d)` are accumulated as pairs, which makes the filter
/// commute exactly with horizontal and vertical flips.
pub fn denoise_nlm(img: &PixelImage, params: &NlmParams) -> Result<PixelImage, ImagingError> {
    params.validate()?;
    if img.is_empty() {
        return Err(ImagingError::Input("zero-sized image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| denoise_plane(&img.plane(c), w, h, params))
        .collect();
    Ok(PixelImage::from_planes(w, h, &planes))
}

/// `((x, y), weight)` for one window pixel.
pub type WindowWeight = ((usize, usize), f64);

/// Normalized weights `w(x, y)` for one output pixel, in window order.
///
/// This is the direct per-pixel evaluation; it is exposed for inspection
/// and diagnostics rather than speed.
pub fn pixel_weights(
    img: &PixelImage,
    params: &NlmParams,
    x: usize,
    y: usize,
    channel: usize,
) -> Result<Vec<WindowWeight>, ImagingError> {
    params.validate()?;
    if x >= img.width() || y >= img.height() || channel >= img.channels() {
        return Err(ImagingError::Input(format!(
            "pixel ({x}, {y}, {channel}) outside image"
        )));
    }
    let r = params.patch_radius as isize;
    let s = params.search_radius as isize;
    let (xi, yi) = (x as isize, y as isize);
    let mut raw = Vec::new();
    for ty in (yi - s).max(0)..=(yi + s).min(img.height() as isize - 1) {
        for tx in (xi - s).max(0)..=(xi + s).min(img.width() as isize - 1) {
            let mut dist = 0.0;
            for py in -r..=r {
                for px in -r..=r {
                    let d = img.get_clamped(xi + px, yi + py, channel) - img.get_clamped(tx + px, ty + py, channel);
                    dist += d * d;
                }
            }
            raw.push(((tx as usize, ty as usize), (-dist / (params.h * params.h)).exp()));
        }
    }
    let z: f64 = raw.iter().map(|(_, w)| w).sum();
    Ok(raw.into_iter().map(|(p, w)| (p, w / z)).collect())
}

fn denoise_plane(plane: &[f64], width: usize, height: usize, params: &NlmParams) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..height)
        .into_par_iter()
        .map(|y| denoise_row(plane, width, height, y, params))
        .collect();
    rows.concat()
}

#[inline]
fn at(plane: &[f64], width: usize, height: usize, x: isize, y: isize) -> f64 {
    let xc = x.clamp(0, width as isize - 1) as usize;
    let yc = y.clamp(0, height as isize - 1) as usize;
    plane[yc * width + xc]
}

/// `[0]` for zero, `[d, -d]` otherwise.
fn signed(d: isize) -> impl Iterator<Item = isize> {
    let second = if d == 0 { None } else { Some(-d) };
    std::iter::once(d).chain(second)
}

struct Accum {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl Accum {
    fn new(n: usize) -> Self {
        Self {
            num: vec![0.0; n],
            den: vec![0.0; n],
        }
    }

    fn clear(&mut self) {
        self.num.fill(0.0);
        self.den.fill(0.0);
    }

    fn add(&mut self, other: &Accum) {
        for (a, b) in self.num.iter_mut().zip(&other.num) {
            *a += *b;
        }
        for (a, b) in self.den.iter_mut().zip(&other.den) {
            *a += *b;
        }
    }
}

fn denoise_row(plane: &[f64], width: usize, height: usize, y: usize, params: &NlmParams) -> Vec<f64> {
    let r = params.patch_radius as isize;
    let s = params.search_radius as isize;
    let h2 = params.h * params.h;
    let (wi, hi, yi) = (width as isize, height as isize, y as isize);

    let mut lo = vec![f64::INFINITY; width];
    let mut hi_v = vec![f64::NEG_INFINITY; width];
    let mut total = Accum::new(width);
    let mut group = Accum::new(width);
    let mut row = Accum::new(width);
    let mut pair = Accum::new(width);
    // Column sums of squared differences for xx in [-r, width + r).
    let mut colsum = vec![0.0; width + 2 * r as usize];

    for dy_abs in 0..=s {
        group.clear();
        for dy in signed(dy_abs) {
            let ty = yi + dy;
            if ty < 0 || ty >= hi {
                continue;
            }
            row.clear();
            for dx_abs in 0..=s {
                pair.clear();
                for dx in signed(dx_abs) {
                    for (i, slot) in colsum.iter_mut().enumerate() {
                        let xx = i as isize - r;
                        let d = |py: isize| {
                            let a = at(plane, width, height, xx, yi + py);
                            let b = at(plane, width, height, xx + dx, ty + py);
                            (a - b) * (a - b)
                        };
                        let mut acc = d(0);
                        for py in 1..=r {
                            acc += d(py) + d(-py);
                        }
                        *slot = acc;
                    }
                    for x in 0..width {
                        let tx = x as isize + dx;
                        if tx < 0 || tx >= wi {
                            continue;
                        }
                        let ci = x + r as usize;
                        let mut dist = colsum[ci];
                        for px in 1..=r as usize {
                            dist += colsum[ci + px] + colsum[ci - px];
                        }
                        let weight = (-dist / h2).exp();
                        let v = plane[ty as usize * width + tx as usize];
                        pair.num[x] += weight * v;
                        pair.den[x] += weight;
                        lo[x] = lo[x].min(v);
                        hi_v[x] = hi_v[x].max(v);
                    }
                }
                row.add(&pair);
            }
            group.add(&row);
        }
        total.add(&group);
    }

    (0..width)
        .map(|x| (total.num[x] / total.den[x]).clamp(lo[x], hi_v[x]))
        .collect()
}
