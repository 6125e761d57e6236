//! Benchmark inputs shared by the criterion targets.

use dermtriage_core::{ClassLabel, ClassProbabilities, LabeledPrediction, PixelImage};

/// Deterministic textured RGB image.
pub fn textured_image(width: usize, height: usize) -> PixelImage {
    PixelImage::from_fn(width, height, 3, |x, y, c| {
        let v = ((x * 31 + y * 17 + c * 7) % 64) as f64 / 63.0;
        0.25 + 0.5 * v
    })
    .expect("valid image")
}

/// `n` labeled predictions cycling through a fixed pattern.
pub fn labeled_predictions(n: usize) -> Vec<LabeledPrediction> {
    (0..n)
        .map(|i| {
            let truth = if i % 2 == 0 { ClassLabel::Bcc } else { ClassLabel::Nv };
            let bcc = ((i * 37) % 101) as f64 / 100.0;
            LabeledPrediction::new(truth, ClassProbabilities::new(1.0 - bcc, bcc).expect("simplex"))
        })
        .collect()
}
