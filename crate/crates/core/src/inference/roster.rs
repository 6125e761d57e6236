use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, InferenceError};

/// Backend roster file.
///
/// ```toml
/// [[backend]]
/// model_id = "efficientnet_b3"
/// kind = "model_file"
/// source = "models/efficientnet_b3.onnx"
/// ```
///
/// Relative `source` paths resolve against the roster file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RosterFile {
    #[serde(default, rename = "backend")]
    pub backends: Vec<BackendDescriptor>,
}

pub(crate) fn check_unique(descs: &[BackendDescriptor]) -> Result<(), InferenceError> {
    let mut seen = HashSet::new();
    for d in descs {
        if !seen.insert(d.model_id.as_str()) {
            return Err(InferenceError::Config(format!("duplicate model_id `{}`", d.model_id)));
        }
    }
    Ok(())
}

pub fn parse_roster(text: &str, base_dir: &Path) -> Result<Vec<BackendDescriptor>, InferenceError> {
    let roster: RosterFile =
        toml::from_str(text).map_err(|e| InferenceError::Config(format!("backend roster: {e}")))?;
    if roster.backends.is_empty() {
        return Err(InferenceError::Config("backend roster lists no backends".into()));
    }
    check_unique(&roster.backends)?;
    Ok(roster
        .backends
        .into_iter()
        .map(|mut d| {
            if d.source.is_relative() {
                d.source = base_dir.join(&d.source);
            }
            d
        })
        .collect())
}

pub fn load_roster(path: &Path) -> Result<Vec<BackendDescriptor>, InferenceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InferenceError::Config(format!("cannot read roster {}: {e}", path.display())))?;
    parse_roster(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{BackendKind, InputShape, TensorLayout};

    #[test]
    fn resolves_relative_sources() {
        let text = r#"
[[backend]]
model_id = "a"
kind = "mock"
source = "mocks/a.toml"

[[backend]]
model_id = "b"
kind = "model_file"
source = "/abs/b.onnx"
layout = "nchw"
input_shape = { height = 8, width = 8, channels = 3 }
"#;
        let descs = parse_roster(text, Path::new("/cfg")).unwrap();
        assert_eq!(descs[0].source, Path::new("/cfg/mocks/a.toml"));
        assert_eq!(descs[0].input_shape, InputShape::default());
        assert_eq!(descs[1].kind, BackendKind::ModelFile);
        assert_eq!(descs[1].layout, TensorLayout::Nchw);
        assert_eq!(descs[1].source, Path::new("/abs/b.onnx"));
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup =
            "[[backend]]\nmodel_id='a'\nkind='mock'\nsource='x'\n[[backend]]\nmodel_id='a'\nkind='mock'\nsource='y'\n";
        assert!(parse_roster(dup, Path::new(".")).is_err());
        assert!(parse_roster("", Path::new(".")).is_err());
    }
}
