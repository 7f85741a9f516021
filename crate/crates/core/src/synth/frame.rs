//! Triangulated crowned panel with downward rib channels.

use super::oracle::FrameParams;
use crate::error::{Error, Result};
use crate::geometry::{load_depths, DepthVector, Point3, Triangle, TriangleMesh};

/// Panel subdivisions along y.
pub const PANEL_SEGMENTS: usize = 25;

/// Ribs may occupy at most this fraction of the panel width.
pub const MAX_RIB_COVER: f64 = 0.9;

fn quad(a: Point3, b: Point3, c: Point3, d: Point3) -> [Triangle; 2] {
    [[a, b, c], [a, c, d]]
}

/// Bottom-surface height of the panel at `y`, linear between panel stations.
struct Crown<'a> {
    p: &'a FrameParams,
    stations: Vec<f64>,
}

impl<'a> Crown<'a> {
    fn new(p: &'a FrameParams) -> Self {
        let stations = (0..=PANEL_SEGMENTS)
            .map(|k| p.width * k as f64 / PANEL_SEGMENTS as f64)
            .collect();
        Crown { p, stations }
    }

    fn exact(&self, y: f64) -> f64 {
        let u = 2.0 * (y - self.p.width / 2.0) / self.p.width;
        self.p.crown * (1.0 - u * u)
    }

    fn at(&self, y: f64) -> f64 {
        let seg = self.p.width / PANEL_SEGMENTS as f64;
        let k = ((y / seg).floor() as usize).min(PANEL_SEGMENTS - 1);
        let (y0, y1) = (self.stations[k], self.stations[k + 1]);
        let (z0, z1) = (self.exact(y0), self.exact(y1));
        let t = (y - y0) / (y1 - y0);
        z0 + t * (z1 - z0)
    }

    /// `from`, every panel station strictly inside `(from, to)`, then `to`.
    fn refine(&self, from: f64, to: f64) -> Vec<f64> {
        let mut ys = vec![from];
        ys.extend(self.stations.iter().copied().filter(|&y| y > from && y < to));
        ys.push(to);
        ys
    }
}

fn panel(p: &FrameParams, crown: &Crown, out: &mut Vec<Triangle>) {
    let (lx, t) = (p.length, p.thickness);
    let ys = &crown.stations;
    for w in ys.windows(2) {
        let (ya, yb) = (w[0], w[1]);
        let (za, zb) = (crown.at(ya), crown.at(yb));
        out.extend(quad(
            [0.0, ya, za + t],
            [lx, ya, za + t],
            [lx, yb, zb + t],
            [0.0, yb, zb + t],
        ));
        out.extend(quad([0.0, ya, za], [0.0, yb, zb], [lx, yb, zb], [lx, ya, za]));
        out.extend(quad([0.0, ya, za], [0.0, ya, za + t], [0.0, yb, zb + t], [0.0, yb, zb]));
        out.extend(quad([lx, ya, za], [lx, yb, zb], [lx, yb, zb + t], [lx, ya, za + t]));
    }
    for &y in [ys[0], ys[ys.len() - 1]].iter() {
        let z = crown.at(y);
        out.extend(quad([0.0, y, z], [lx, y, z], [lx, y, z + t], [0.0, y, z + t]));
    }
}

/// Open channel hanging from the panel underside: bottom, two side walls
/// and two end walls, following the crown.
fn rib(p: &FrameParams, crown: &Crown, i: usize, out: &mut Vec<Triangle>) {
    let (x0, x1) = (0.1 * p.length, 0.9 * p.length);
    let yc = p.rib_center(i);
    let d = p.rib_depths[i];
    let ys = crown.refine(yc - p.rib_width / 2.0, yc + p.rib_width / 2.0);
    for w in ys.windows(2) {
        let (ya, yb) = (w[0], w[1]);
        let (za, zb) = (crown.at(ya), crown.at(yb));
        out.extend(quad(
            [x0, ya, za - d],
            [x0, yb, zb - d],
            [x1, yb, zb - d],
            [x1, ya, za - d],
        ));
        out.extend(quad([x0, ya, za - d], [x0, ya, za], [x0, yb, zb], [x0, yb, zb - d]));
        out.extend(quad([x1, ya, za - d], [x1, yb, zb - d], [x1, yb, zb], [x1, ya, za]));
    }
    for &y in [ys[0], ys[ys.len() - 1]].iter() {
        let z = crown.at(y);
        out.extend(quad([x0, y, z - d], [x1, y, z - d], [x1, y, z], [x0, y, z]));
    }
}

/// Whether the planes of `n` ribs of width `w` fit across the panel.
pub fn ribs_fit(p: &FrameParams) -> bool {
    p.rib_count() as f64 * p.rib_width <= MAX_RIB_COVER * p.width
}

/// Meshes the frame and returns its depth vector padded to `depth_len`.
/// The panel spans `[0, length] × [0, width]` with its underside at the
/// crown height; each rib spans the middle 80% of the length.
pub fn gen_frame(id: &str, p: &FrameParams, depth_len: usize) -> Result<(TriangleMesh, DepthVector)> {
    p.validate(depth_len)?;
    if !ribs_fit(p) {
        return Err(Error::data(format!(
            "{} ribs of width {} do not fit in a {} mm wide panel",
            p.rib_count(),
            p.rib_width,
            p.width
        )));
    }
    let crown = Crown::new(p);
    let mut tris = Vec::with_capacity(8 * PANEL_SEGMENTS + 4 + p.rib_count() * 64);
    panel(p, &crown, &mut tris);
    for i in 0..p.rib_count() {
        rib(p, &crown, i, &mut tris);
    }
    Ok((TriangleMesh::new(id, tris)?, load_depths(&p.rib_depths, depth_len)?))
}
