use super::mesh::TriangleMesh;
use super::raster::{render_view, View, ViewImage};
use super::section::{resample_pad, slice_section, CrossSection};
use crate::error::{Error, Result};

/// Fixed-length rib depths (mm), zero past the actual rib count.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVector {
    depths: Vec<f64>,
}

impl DepthVector {
    pub fn values(&self) -> &[f64] {
        &self.depths
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Places `values` first in a zero vector of length `len`.
pub fn load_depths(values: &[f64], len: usize) -> Result<DepthVector> {
    if values.len() > len {
        return Err(Error::data(format!(
            "{} rib depths exceed the maximum of {len}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::data(format!("rib depth {v} must be finite and non-negative")));
    }
    let mut depths = values.to_vec();
    depths.resize(len, 0.0);
    Ok(DepthVector { depths })
}

/// Performance targets of one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTriple {
    /// von Mises stress, MPa.
    pub stress: f64,
    /// kg
    pub mass: f64,
    /// Directional deflection, mm.
    pub deflection: f64,
}

impl TargetTriple {
    pub const NAMES: [&'static str; 3] = ["stress", "mass", "deflection"];

    pub fn to_array(self) -> [f64; 3] {
        [self.stress, self.mass, self.deflection]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        TargetTriple {
            stress: v[0],
            mass: v[1],
            deflection: v[2],
        }
    }
}

pub const SECTION_FRACTIONS: [f64; 2] = [0.25, 0.75];

/// One design in every modality the fused model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: String,
    pub top: ViewImage,
    pub side: ViewImage,
    pub sec25: CrossSection,
    pub sec75: CrossSection,
    pub depths: DepthVector,
    pub targets: Option<TargetTriple>,
}

/// Extracts every modality from `mesh`. Errors carry the mesh id.
pub fn assemble_record(
    mesh: &TriangleMesh,
    depths: DepthVector,
    targets: Option<TargetTriple>,
    section_len: usize,
) -> Result<FrameRecord> {
    let build = || -> Result<FrameRecord> {
        let section = |f: f64| slice_section(mesh, f).and_then(|s| resample_pad(&s, section_len));
        let sec25 = section(SECTION_FRACTIONS[0])?;
        let sec75 = section(SECTION_FRACTIONS[1])?;
        Ok(FrameRecord {
            id: mesh.id.clone(),
            top: render_view(mesh, View::Top)?,
            side: render_view(mesh, View::Side)?,
            sec25,
            sec75,
            depths,
            targets,
        })
    };
    build().map_err(|e| e.with_record(&mesh.id))
}
