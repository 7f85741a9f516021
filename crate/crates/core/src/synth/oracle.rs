//! Closed-form beam idealization standing in for finite-element results.

use crate::error::{Error, Result};
use crate::geometry::TargetTriple;

pub const STEEL_DENSITY: f64 = 7.85e-6;
pub const STEEL_MODULUS: f64 = 210_000.0;
pub const DEFAULT_LOAD: f64 = 1000.0;

/// One parametric frame design. Lengths in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameParams {
    /// Extent along x.
    pub length: f64,
    /// Extent along y.
    pub width: f64,
    pub thickness: f64,
    /// Parabolic rise of the panel mid-width.
    pub crown: f64,
    /// One entry per rib, ribs evenly spaced along y.
    pub rib_depths: Vec<f64>,
    pub rib_width: f64,
    /// kg/mm³
    pub density: f64,
    /// MPa
    pub modulus: f64,
    /// N
    pub load: f64,
}

impl FrameParams {
    /// Steel panel with default material and load.
    pub fn new(length: f64, width: f64, thickness: f64, crown: f64, rib_depths: Vec<f64>, rib_width: f64) -> Self {
        FrameParams {
            length,
            width,
            thickness,
            crown,
            rib_depths,
            rib_width,
            density: STEEL_DENSITY,
            modulus: STEEL_MODULUS,
            load: DEFAULT_LOAD,
        }
    }

    pub fn rib_count(&self) -> usize {
        self.rib_depths.len()
    }

    pub fn validate(&self, max_ribs: usize) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("thickness", self.thickness),
            ("rib width", self.rib_width),
            ("density", self.density),
            ("modulus", self.modulus),
            ("load", self.load),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::data(format!("frame {name} {v} must be positive")));
        }
        if !(self.crown.is_finite() && self.crown >= 0.0) {
            return Err(Error::data(format!("crown height {} must be non-negative", self.crown)));
        }
        if self.rib_count() > max_ribs {
            return Err(Error::data(format!(
                "{} ribs exceed the maximum of {max_ribs}",
                self.rib_count()
            )));
        }
        if let Some(d) = self.rib_depths.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::data(format!("rib depth {d} must be positive")));
        }
        Ok(())
    }

    /// y coordinate of rib `i`'s centerline.
    pub fn rib_center(&self, i: usize) -> f64 {
        self.width * (i + 1) as f64 / (self.rib_count() + 1) as f64
    }

    /// Length of every rib along x.
    pub fn rib_run(&self) -> f64 {
        0.8 * self.length
    }

    /// Panel plus rib second moment of area about the bending axis, mm⁴.
    pub fn effective_inertia(&self) -> f64 {
        let panel = self.width * self.thickness.powi(3) / 12.0;
        panel
            + self
                .rib_depths
                .iter()
                .map(|d| self.rib_width * d.powi(3) / 3.0)
                .sum::<f64>()
    }
}

/// Mass, simply supported mid-span deflection and extreme-fibre bending
/// stress of the frame.
pub fn oracle_targets(p: &FrameParams) -> TargetTriple {
    let panel_area = p.length * p.width * (1.0 + 0.5 * (p.crown / p.width).powi(2));
    let rib_area: f64 = p.rib_depths.iter().map(|d| 2.0 * d * p.rib_run()).sum();
    let inertia = p.effective_inertia();
    let c = p.thickness / 2.0 + p.rib_depths.iter().copied().fold(0.0, f64::max);
    TargetTriple {
        stress: p.load * p.length / 4.0 * c / inertia,
        mass: p.density * p.thickness * (panel_area + rib_area),
        deflection: p.load * p.length.powi(3) / (48.0 * p.modulus * inertia),
    }
}
