//! Parametric ribbed panels with analytic performance targets, for training
//! and testing the pipeline without finite-element data.

mod dataset;
mod frame;
mod oracle;

pub use dataset::{
    crossing_ribs, draw_params, gen_dataset, gen_dataset_with_params, gen_record, record_id, record_params,
    ParamRanges, SynthConfig,
};
pub use frame::{gen_frame, ribs_fit, MAX_RIB_COVER, PANEL_SEGMENTS};
pub use oracle::{oracle_targets, FrameParams, DEFAULT_LOAD, STEEL_DENSITY, STEEL_MODULUS};
