use tract_onnx::prelude::*;

use super::{
    BackendDescriptor, ChannelNormalization, ClassProbabilities, Classifier, InferenceError, InputShape, OutputKind,
    TensorLayout,
};
use crate::imaging::PixelImage;

type Plan = TypedRunnableModel<TypedModel>;

/// ONNX model-file backend evaluated with tract.
///
/// The model takes one `f32` tensor of shape `[1, H, W, C]` (or
/// `[1, C, H, W]`) and its first output holds two values in class order
/// NV, BCC, either probabilities or logits.
pub struct OnnxBackend {
    model_id: String,
    input_shape: InputShape,
    layout: TensorLayout,
    output: OutputKind,
    normalization: Option<ChannelNormalization>,
    plan: Plan,
}

impl std::fmt::Debug for OnnxBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackend")
            .field("model_id", &self.model_id)
            .field("input_shape", &self.input_shape)
            .field("layout", &self.layout)
            .field("output", &self.output)
            .finish_non_exhaustive()
    }
}

fn backend_error(model_id: &str, e: impl std::fmt::Display) -> InferenceError {
    InferenceError::Backend {
        model_id: model_id.to_string(),
        message: e.to_string(),
    }
}

impl OnnxBackend {
    pub fn load(desc: &BackendDescriptor) -> Result<Self, InferenceError> {
        let InputShape {
            height,
            width,
            channels,
        } = desc.input_shape;
        if let Some(norm) = &desc.normalization {
            if norm.mean.len() != channels || norm.std.len() != channels || norm.std.contains(&0.0) {
                return Err(InferenceError::Config(format!(
                    "normalization for `{}` needs {channels} means and non-zero stds",
                    desc.model_id
                )));
            }
        }
        let dims: [usize; 4] = match desc.layout {
            TensorLayout::Nhwc => [1, height, width, channels],
            TensorLayout::Nchw => [1, channels, height, width],
        };
        let plan = tract_onnx::onnx()
            .model_for_path(&desc.source)
            .and_then(|m| m.with_input_fact(0, f32::fact(dims).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| backend_error(&desc.model_id, format!("cannot load {}: {e:#}", desc.source.display())))?;
        Ok(Self {
            model_id: desc.model_id.clone(),
            input_shape: desc.input_shape,
            layout: desc.layout,
            output: desc.output,
            normalization: desc.normalization.clone(),
            plan,
        })
    }

    fn input_tensor(&self, img: &PixelImage) -> Result<Tensor, InferenceError> {
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let value = |x: usize, y: usize, ch: usize| -> f32 {
            let v = img.get(x, y, ch);
            match &self.normalization {
                Some(n) => ((v - n.mean[ch]) / n.std[ch]) as f32,
                None => v as f32,
            }
        };
        let array = match self.layout {
            TensorLayout::Nhwc => tract_ndarray::Array4::from_shape_fn((1, h, w, c), |(_, y, x, ch)| value(x, y, ch)),
            TensorLayout::Nchw => tract_ndarray::Array4::from_shape_fn((1, c, h, w), |(_, ch, y, x)| value(x, y, ch)),
        };
        Ok(array.into_tensor())
    }
}

impl Classifier for OnnxBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn input_shape(&self) -> InputShape {
        self.input_shape
    }

    fn classify(&self, img: &PixelImage) -> Result<ClassProbabilities, InferenceError> {
        let input = self.input_tensor(img)?;
        let outputs = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| backend_error(&self.model_id, format!("{e:#}")))?;
        let first = outputs
            .first()
            .ok_or_else(|| backend_error(&self.model_id, "model produced no outputs"))?;
        let view = first
            .to_array_view::<f32>()
            .map_err(|e| backend_error(&self.model_id, format!("{e:#}")))?;
        let values: Vec<f64> = view.iter().map(|v| *v as f64).collect();
        if values.len() != 2 {
            return Err(backend_error(
                &self.model_id,
                format!("expected 2 output values, got {}", values.len()),
            ));
        }
        match self.output {
            OutputKind::Logits => ClassProbabilities::from_logits(values[0], values[1]),
            OutputKind::Probabilities => ClassProbabilities::from_scores(values[0], values[1]),
        }
    }
}
