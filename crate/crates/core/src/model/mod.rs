//! Five-branch fused regressor and its image-only baseline.

mod config;
mod encoders;
mod fusion;
mod input;
mod layers;
mod store;

pub use config::{Modality, ModelConfig};
pub use encoders::{
    build_image_branch, build_param_branch, build_section_branch, EncoderPreset, ImageEncoder, MlpEncoder,
    DEPTH_WIDTHS, EMBED_WIDTH, SECTION_WIDTHS,
};
pub use fusion::{
    build_fusion_head, build_unimodal_baseline, FusedModel, FusionHead, TrainGraph, HEAD_WIDTHS, OUTPUT_WIDTH,
};
pub use input::{inputs_of, FeatureScaler, InputScaler, ModelInput};
pub use layers::{BatchNorm, Conv, Dense, Session, StatsAccess};
pub use store::{ParamId, ParamKind, ParameterStore, StatsId};
