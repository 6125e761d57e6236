use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The two lesion classes handled by the system.
///
/// Declaration order is the class order used for tie-breaking: `Nv` wins
/// every tie against `Bcc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "NV")]
    Nv,
    #[serde(rename = "BCC")]
    Bcc,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Nv, ClassLabel::Bcc];

    pub fn index(self) -> usize {
        match self {
            ClassLabel::Nv => 0,
            ClassLabel::Bcc => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Manifest / wire token (`NV`, `BCC`).
    pub fn token(self) -> &'static str {
        match self {
            ClassLabel::Nv => "NV",
            ClassLabel::Bcc => "BCC",
        }
    }

    /// Patient-facing name.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassLabel::Nv => "Nevus",
            ClassLabel::Bcc => "Basal Cell Carcinoma",
        }
    }

    pub fn other(self) -> Self {
        match self {
            ClassLabel::Nv => ClassLabel::Bcc,
            ClassLabel::Bcc => ClassLabel::Nv,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label `{0}` (expected NV or BCC)")]
pub struct UnknownLabel(pub String);

impl FromStr for ClassLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "NV" => Ok(ClassLabel::Nv),
            "BCC" => Ok(ClassLabel::Bcc),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for label in ClassLabel::ALL {
            assert_eq!(label.token().parse::<ClassLabel>().unwrap(), label);
            assert_eq!(ClassLabel::from_index(label.index()), Some(label));
        }
        assert!("MEL".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn nv_orders_first() {
        assert!(ClassLabel::Nv < ClassLabel::Bcc);
        assert_eq!(ClassLabel::Nv.other(), ClassLabel::Bcc);
    }
}
