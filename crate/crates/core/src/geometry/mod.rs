//! Mesh parsing and extraction of the three input modalities: orthographic
//! view images, cross-section polylines and rib-depth vectors.

pub mod io;
mod mesh;
mod raster;
mod record;
mod section;
mod stl;

pub use mesh::{bounding_box, box_triangles, BoundingBox, Point3, Triangle, TriangleMesh};
pub use raster::{render_view, View, ViewImage, FAR_INTENSITY, IMAGE_SIZE};
pub use record::{assemble_record, load_depths, DepthVector, FrameRecord, TargetTriple, SECTION_FRACTIONS};
pub use section::{
    chain_segments, plane_y, resample_pad, slice_section, triangle_plane_segment, CrossSection, CHAIN_TOL,
};
pub use stl::{parse_stl, to_binary_stl};

/// Points per resampled cross-section.
pub const SECTION_LEN: usize = 512;
/// Maximum rib count carried by a depth vector.
pub const DEPTH_LEN: usize = 16;
