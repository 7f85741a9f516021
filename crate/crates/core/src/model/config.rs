use super::encoders::EncoderPreset;
use crate::error::{Error, Result};
use crate::geometry::{DEPTH_LEN, SECTION_LEN};
use std::fmt;
use std::str::FromStr;

/// Network topology and regularization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderPreset,
    /// Points per resampled cross-section.
    pub section_len: usize,
    /// Entries per rib-depth vector.
    pub depth_len: usize,
    /// Dropout after the 128-, 64- and 32-wide fusion layers.
    pub dropout_rates: [f64; 3],
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderPreset::Resnet50,
            section_len: SECTION_LEN,
            depth_len: DEPTH_LEN,
            dropout_rates: [0.5, 0.4, 0.3],
            l2_lambda: 1e-4,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.section_len < 4 {
            return Err(Error::usage(format!(
                "section_len {} must be at least 4",
                self.section_len
            )));
        }
        if self.depth_len == 0 {
            return Err(Error::usage("depth_len must be at least 1"));
        }
        if let Some(r) = self.dropout_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::usage(format!("dropout rate {r} outside [0, 1)")));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(Error::usage(format!(
                "l2_lambda {} must be finite and non-negative",
                self.l2_lambda
            )));
        }
        Ok(())
    }
}

/// Which branches feed the fusion head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    /// Top, side, both sections and the depth vector.
    Multimodal,
    /// Top and side views only.
    ImageOnly,
}

impl Modality {
    pub fn fused_width(self) -> usize {
        match self {
            Modality::Multimodal => 5 * super::EMBED_WIDTH,
            Modality::ImageOnly => 2 * super::EMBED_WIDTH,
        }
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi" | "multimodal" => Ok(Modality::Multimodal),
            "image-only" | "image_only" => Ok(Modality::ImageOnly),
            other => Err(Error::usage(format!(
                "unknown modality '{other}' (expected multi or image-only)"
            ))),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Multimodal => "multimodal",
            Modality::ImageOnly => "image_only",
        })
    }
}
