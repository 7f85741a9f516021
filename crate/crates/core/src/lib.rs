//! Multimodal surrogate models for hood-frame structural performance.
//!
//! The pipeline turns a triangle mesh into three modalities (orthographic
//! depth images, cross-section polylines and a rib-depth vector), encodes
//! each with its own network, fuses the embeddings and regresses von Mises
//! stress, mass and directional deflection.

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod model;
pub mod par;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
