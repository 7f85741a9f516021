//! Orthographic depth-map rendering of triangle meshes.

use super::mesh::{bounding_box, TriangleMesh};
use crate::error::{Error, Result};

pub const IMAGE_SIZE: usize = 128;

/// Intensity of the farthest visible surface; background stays at 0.
pub const FAR_INTENSITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    /// Looking down −z onto the x–y plane.
    Top,
    /// Looking along +y onto the x–z plane.
    Side,
}

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::Top => "top",
            View::Side => "side",
        }
    }

    /// (horizontal, vertical, depth) axis indices.
    fn axes(self) -> (usize, usize, usize) {
        match self {
            View::Top => (0, 1, 2),
            View::Side => (0, 2, 1),
        }
    }
}

/// 128×128 grayscale, row-major, row 0 at the top of the picture.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub view: View,
    pixels: Vec<f64>,
}

impl ViewImage {
    pub fn new(view: View, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != IMAGE_SIZE * IMAGE_SIZE {
            return Err(Error::data(format!(
                "{} view has {} pixels, expected {}",
                view.name(),
                pixels.len(),
                IMAGE_SIZE * IMAGE_SIZE
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::data(format!("{} view pixel {p} outside [0,1]", view.name())));
        }
        Ok(ViewImage { view, pixels })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * IMAGE_SIZE + col]
    }

    pub fn covered(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Renders the nearest-surface depth map of `mesh` for `view`.
///
/// The longer footprint extent spans the full 128 pixels, the shorter one is
/// centred. Depth is normalised over the mesh's extent along the view axis so
/// the nearest surface maps to 1 and the farthest to [`FAR_INTENSITY`].
pub fn render_view(mesh: &TriangleMesh, view: View) -> Result<ViewImage> {
    let bb = bounding_box(mesh)?;
    let (ua, va, da) = view.axes();
    let (umin, vmax) = (bb.min[ua], bb.max[va]);
    let (eu, ev) = (bb.max[ua] - bb.min[ua], bb.max[va] - bb.min[va]);
    if !(eu > 0.0 && ev > 0.0) {
        return Err(Error::data(format!(
            "{} view footprint is degenerate ({eu} x {ev} mm)",
            view.name()
        )));
    }
    let size = IMAGE_SIZE as f64;
    let scale = size / eu.max(ev);
    let off_u = (size - eu * scale) / 2.0;
    let off_v = (size - ev * scale) / 2.0;
    // Viewer sits at max z for the top view and at min y for the side view.
    let dist = |p: &[f64; 3]| match view {
        View::Top => bb.max[da] - p[da],
        View::Side => p[da] - bb.min[da],
    };
    let depth_extent = bb.max[da] - bb.min[da];

    let mut zbuf = vec![f64::INFINITY; IMAGE_SIZE * IMAGE_SIZE];
    for tri in mesh.triangles() {
        // Pixel-space coordinates: column grows with u, row grows as v falls.
        let px: [[f64; 3]; 3] = std::array::from_fn(|i| {
            let p = &tri[i];
            [(p[ua] - umin) * scale + off_u, (vmax - p[va]) * scale + off_v, dist(p)]
        });
        let area = (px[1][0] - px[0][0]) * (px[2][1] - px[0][1]) - (px[2][0] - px[0][0]) * (px[1][1] - px[0][1]);
        if area.abs() < 1e-12 {
            continue;
        }
        let lo = |a: usize| px.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
        let hi = |a: usize| px.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        let c0 = ((lo(0) - 0.5).floor().max(0.0)) as usize;
        let c1 = ((hi(0) - 0.5).ceil().min(size - 1.0)).max(0.0) as usize;
        let r0 = ((lo(1) - 0.5).floor().max(0.0)) as usize;
        let r1 = ((hi(1) - 0.5).ceil().min(size - 1.0)).max(0.0) as usize;
        for r in r0..=r1 {
            let y = r as f64 + 0.5;
            for c in c0..=c1 {
                let x = c as f64 + 0.5;
                let edge = |a: &[f64; 3], b: &[f64; 3]| (b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1]);
                let w0 = edge(&px[1], &px[2]) / area;
                let w1 = edge(&px[2], &px[0]) / area;
                let w2 = edge(&px[0], &px[1]) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let d = w0 * px[0][2] + w1 * px[1][2] + w2 * px[2][2];
                let slot = &mut zbuf[r * IMAGE_SIZE + c];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    let pixels = zbuf
        .into_iter()
        .map(|d| {
            if d.is_infinite() {
                0.0
            } else if depth_extent > 0.0 {
                let t = (d / depth_extent).clamp(0.0, 1.0);
                1.0 - (1.0 - FAR_INTENSITY) * t
            } else {
                1.0
            }
        })
        .collect();
    ViewImage::new(view, pixels)
}

#[cfg(test)]
mod tests {
    use super::super::mesh::box_triangles;
    use super::*;

    #[test]
    fn flat_plate_top_view_is_uniform_one() {
        let plate = TriangleMesh::new(
            "plate",
            vec![
                [[0.0, 0.0, 2.0], [4.0, 0.0, 2.0], [4.0, 2.0, 2.0]],
                [[0.0, 0.0, 2.0], [4.0, 2.0, 2.0], [0.0, 2.0, 2.0]],
            ],
        )
        .unwrap();
        let img = render_view(&plate, View::Top).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.0 || p == 1.0));
        assert_eq!(img.covered(), 128 * 64);
        // Letterbox rows stay background.
        assert_eq!(img.at(0, 64), 0.0);
        assert_eq!(img.at(64, 64), 1.0);
    }

    #[test]
    fn half_width_box_covers_half_the_pixels() {
        let mesh = TriangleMesh::new("b", box_triangles([0.0; 3], [2.0, 1.0, 0.5])).unwrap();
        let img = render_view(&mesh, View::Top).unwrap();
        let want = 0.5 * 128.0 * 128.0;
        assert!((img.covered() as f64 - want).abs() <= 128.0);
    }

    #[test]
    fn near_and_far_surfaces() {
        // Thin top plate above a lower plate that sticks out on one side.
        let mut tris = box_triangles([0.0, 0.0, 9.0], [1.0, 2.0, 10.0]);
        tris.extend(box_triangles([1.0, 0.0, 0.0], [2.0, 2.0, 1.0]));
        let img = render_view(&TriangleMesh::new("s", tris).unwrap(), View::Top).unwrap();
        assert_eq!(img.at(64, 10), 1.0);
        // Top face of the low box sits 9 mm below the viewer over a 10 mm extent.
        let want = 1.0 - (1.0 - FAR_INTENSITY) * 0.9;
        assert!((img.at(64, 100) - want).abs() < 1e-12);
    }

    #[test]
    fn degenerate_footprint_rejected() {
        let mesh = TriangleMesh::new("line", vec![[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 1.0]]]).unwrap();
        assert!(matches!(render_view(&mesh, View::Top), Err(Error::Data(_))));
    }

    #[test]
    fn side_view_sees_depth_along_y() {
        let mesh = TriangleMesh::new("b", box_triangles([0.0; 3], [2.0, 3.0, 1.0])).unwrap();
        let img = render_view(&mesh, View::Side).unwrap();
        assert_eq!(img.covered(), 128 * 64);
        assert_eq!(img.at(64, 64), 1.0);
    }
}
