//! Planar cross-sections at constant y and their fixed-length resampling.

use super::mesh::{bounding_box, Point3, Triangle, TriangleMesh};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Endpoints closer than this (mm) are treated as the same polyline vertex.
pub const CHAIN_TOL: f64 = 1e-6;

/// Ordered `(x, z)` polyline of a slice at `fraction` of the mesh width.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub fraction: f64,
    pub points: Vec<[f64; 2]>,
}

impl CrossSection {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x0, z0, x1, z1, ...`
    pub fn interleaved(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().flat_map(|p| [p[0], p[1]])
    }
}

/// Width-axis coordinate of the plane at `fraction` of the mesh y-extent.
pub fn plane_y(mesh: &TriangleMesh, fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::usage(format!("section fraction {fraction} outside [0,1]")));
    }
    let bb = bounding_box(mesh)?;
    Ok(bb.min[1] + fraction * (bb.max[1] - bb.min[1]))
}

fn lex_less(a: &Point3, b: &Point3) -> bool {
    a.partial_cmp(b) == Some(std::cmp::Ordering::Less)
}

/// Segment where the plane `y = y0` crosses `tri`, if the crossing has
/// positive length. Triangles lying in the plane and single-vertex touches
/// yield nothing.
pub fn triangle_plane_segment(tri: &Triangle, y0: f64) -> Option<[[f64; 2]; 2]> {
    let s: [f64; 3] = std::array::from_fn(|i| tri[i][1] - y0);
    if s.iter().all(|&v| v == 0.0) {
        return None;
    }
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(3);
    for (p, &sv) in tri.iter().zip(&s) {
        if sv == 0.0 {
            pts.push([p[0], p[2]]);
        }
    }
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        if s[i] * s[j] < 0.0 {
            // Interpolate from the lexicographically smaller endpoint so both
            // triangles sharing this edge produce the identical point.
            let (a, b) = if lex_less(&tri[j], &tri[i]) {
                (tri[j], tri[i])
            } else {
                (tri[i], tri[j])
            };
            let t = (y0 - a[1]) / (b[1] - a[1]);
            pts.push([a[0] + t * (b[0] - a[0]), a[2] + t * (b[2] - a[2])]);
        }
    }
    pts.dedup();
    match pts.as_slice() {
        [a, b] if a != b => Some([*a, *b]),
        _ => None,
    }
}

struct NodeIndex {
    cells: HashMap<(i64, i64), Vec<usize>>,
    nodes: Vec<[f64; 2]>,
}

impl NodeIndex {
    const CELL: f64 = 1e-3;

    fn key(p: [f64; 2]) -> (i64, i64) {
        ((p[0] / Self::CELL).floor() as i64, (p[1] / Self::CELL).floor() as i64)
    }

    fn intern(&mut self, p: [f64; 2]) -> usize {
        let (kx, kz) = Self::key(p);
        for dx in -1..=1 {
            for dz in -1..=1 {
                if let Some(ids) = self.cells.get(&(kx + dx, kz + dz)) {
                    for &id in ids {
                        let q = self.nodes[id];
                        if (q[0] - p[0]).abs() <= CHAIN_TOL && (q[1] - p[1]).abs() <= CHAIN_TOL {
                            return id;
                        }
                    }
                }
            }
        }
        self.nodes.push(p);
        let id = self.nodes.len() - 1;
        self.cells.entry((kx, kz)).or_default().push(id);
        id
    }
}

fn cmp_point(a: &[f64; 2], b: &[f64; 2]) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

/// Chains segments into polylines and concatenates them by ascending minimum x.
pub fn chain_segments(mut segments: Vec<[[f64; 2]; 2]>) -> Vec<[f64; 2]> {
    for s in segments.iter_mut() {
        if cmp_point(&s[1], &s[0]).is_lt() {
            s.swap(0, 1);
        }
    }
    segments.sort_by(|a, b| cmp_point(&a[0], &b[0]).then(cmp_point(&a[1], &b[1])));
    segments.dedup();

    let mut index = NodeIndex {
        cells: HashMap::new(),
        nodes: Vec::new(),
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for s in &segments {
        let (a, b) = (index.intern(s[0]), index.intern(s[1]));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let nodes = index.nodes;
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (e, &(a, b)) in edges.iter().enumerate() {
        incident[a].push(e);
        incident[b].push(e);
    }
    let mut used = vec![false; edges.len()];
    let remaining = |n: usize, used: &[bool]| incident[n].iter().filter(|&&e| !used[e]).count();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    loop {
        let live: Vec<usize> = (0..nodes.len()).filter(|&n| remaining(n, &used) > 0).collect();
        if live.is_empty() {
            break;
        }
        let smallest = |cands: &mut dyn Iterator<Item = usize>| cands.min_by(|&a, &b| cmp_point(&nodes[a], &nodes[b]));
        let start = smallest(&mut live.iter().copied().filter(|&n| remaining(n, &used) % 2 == 1))
            .or_else(|| smallest(&mut live.iter().copied()))
            .expect("live nodes");
        let mut chain = vec![start];
        let mut at = start;
        loop {
            let next = incident[at]
                .iter()
                .copied()
                .filter(|&e| !used[e])
                .map(|e| (e, if edges[e].0 == at { edges[e].1 } else { edges[e].0 }))
                .min_by(|a, b| cmp_point(&nodes[a.1], &nodes[b.1]));
            let Some((e, other)) = next else { break };
            used[e] = true;
            chain.push(other);
            at = other;
        }
        if chain.len() > 2 && chain.first() == chain.last() {
            chain.pop();
        }
        chains.push(chain);
    }
    let min_x = |c: &Vec<usize>| c.iter().map(|&n| nodes[n][0]).fold(f64::INFINITY, f64::min);
    chains.sort_by(|a, b| {
        min_x(a)
            .partial_cmp(&min_x(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(cmp_point(&nodes[a[0]], &nodes[b[0]]))
    });
    chains.into_iter().flatten().map(|n| nodes[n]).collect()
}

/// Slices the mesh with the plane `y = ymin + fraction·(ymax − ymin)`.
pub fn slice_section(mesh: &TriangleMesh, fraction: f64) -> Result<CrossSection> {
    let y0 = plane_y(mesh, fraction)?;
    let segments: Vec<_> = mesh
        .triangles()
        .iter()
        .filter_map(|t| triangle_plane_segment(t, y0))
        .collect();
    if segments.is_empty() {
        return Err(Error::data(format!(
            "empty section: plane y = {y0} at fraction {fraction} misses the mesh"
        )));
    }
    Ok(CrossSection {
        fraction,
        points: chain_segments(segments),
    })
}

/// Brings a section to exactly `target_len` points.
///
/// Shorter sections grow by re-inserting copies of their first and last
/// ⌈n/10⌉ points, alternating head and tail; longer ones are subsampled at
/// indices ⌊i·(n−1)/(L−1)⌋. Endpoints stay in place either way.
pub fn resample_pad(section: &CrossSection, target_len: usize) -> Result<CrossSection> {
    let n = section.len();
    if n < 2 {
        return Err(Error::data(format!("section has {n} points, need at least 2")));
    }
    if target_len < 4 {
        return Err(Error::usage(format!(
            "target section length {target_len} must be at least 4"
        )));
    }
    let pts = &section.points;
    let points = match n.cmp(&target_len) {
        std::cmp::Ordering::Equal => pts.clone(),
        std::cmp::Ordering::Greater => (0..target_len).map(|i| pts[i * (n - 1) / (target_len - 1)]).collect(),
        std::cmp::Ordering::Less => {
            let window = n.div_ceil(10);
            let head_win = &pts[..window];
            let tail_win = &pts[n - window..];
            let mut head: Vec<[f64; 2]> = Vec::new();
            let mut tail: Vec<[f64; 2]> = Vec::new();
            let mut total = n;
            let mut at_head = true;
            while total < target_len {
                let take = window.min(target_len - total);
                if at_head {
                    // Prepended block starts with a copy of the first point.
                    let mut block = head_win[..take].to_vec();
                    block.extend_from_slice(&head);
                    head = block;
                } else {
                    tail.extend_from_slice(&tail_win[window - take..]);
                }
                total += take;
                at_head = !at_head;
            }
            let mut out = head;
            out.extend_from_slice(pts);
            out.extend_from_slice(&tail);
            out
        }
    };
    Ok(CrossSection {
        fraction: section.fraction,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::super::mesh::box_triangles;
    use super::*;

    fn cube() -> TriangleMesh {
        TriangleMesh::new("cube", box_triangles([0.0; 3], [1.0; 3])).unwrap()
    }

    fn on_square_boundary(p: [f64; 2]) -> bool {
        let inside = (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]);
        inside && (p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0)
    }

    #[test]
    fn cube_quarter_section_is_square_perimeter() {
        let s = slice_section(&cube(), 0.25).unwrap();
        assert!(s.points.iter().all(|&p| on_square_boundary(p)), "{:?}", s.points);
        for c in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
            assert!(s.points.contains(&c), "missing corner {c:?}");
        }
        // Consecutive points (cyclically) share a side of the square.
        let n = s.len();
        for i in 0..n {
            let (a, b) = (s.points[i], s.points[(i + 1) % n]);
            assert!(a[0] == b[0] || a[1] == b[1], "{a:?} -> {b:?} cuts across");
        }
        assert_eq!(s.points[0], [0.0, 0.0]);
    }

    #[test]
    fn single_triangle_gives_one_segment() {
        let mesh = TriangleMesh::new("t", vec![[[0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 2.0, 2.0]]]).unwrap();
        let s = slice_section(&mesh, 0.5).unwrap();
        // Edge (0,0,0)-(0,2,0) hits at z=0, edge (0,0,0)-(0,2,2) at z=1.
        assert_eq!(s.points, vec![[0.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn fraction_outside_unit_interval_is_usage() {
        assert!(matches!(slice_section(&cube(), 1.5), Err(Error::Usage(_))));
        assert!(matches!(slice_section(&cube(), -0.1), Err(Error::Usage(_))));
    }

    #[test]
    fn flat_in_y_mesh_is_empty_section() {
        let mesh = TriangleMesh::new("flat", vec![[[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]]).unwrap();
        match slice_section(&mesh, 0.25) {
            Err(Error::Data(m)) => assert!(m.contains("empty section")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edge_in_plane_counts_once() {
        // Two triangles sharing the edge y = 1 on either side of the plane.
        let mesh = TriangleMesh::new(
            "strip",
            vec![
                [[0.0, 0.0, 0.0], [2.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
                [[0.0, 1.0, 0.0], [2.0, 1.0, 0.0], [1.0, 2.0, 0.0]],
            ],
        )
        .unwrap();
        let s = slice_section(&mesh, 0.5).unwrap();
        assert_eq!(s.points, vec![[0.0, 0.0], [2.0, 0.0]]);
    }

    #[test]
    fn disjoint_loops_ordered_by_min_x() {
        let mut tris = box_triangles([5.0, 0.0, 0.0], [6.0, 1.0, 1.0]);
        tris.extend(box_triangles([0.0, 0.0, 3.0], [1.0, 1.0, 4.0]));
        let s = slice_section(&TriangleMesh::new("two", tris).unwrap(), 0.5).unwrap();
        let split = s.points.iter().position(|p| p[0] >= 5.0).unwrap();
        assert!(s.points[..split].iter().all(|p| p[0] <= 1.0));
        assert!(s.points[split..].iter().all(|p| p[0] >= 5.0));
    }

    fn line(n: usize) -> CrossSection {
        CrossSection {
            fraction: 0.25,
            points: (0..n).map(|i| [i as f64, (i * i) as f64]).collect(),
        }
    }

    #[test]
    fn pad_hundred_to_one_twenty() {
        let s = line(100);
        let r = resample_pad(&s, 120).unwrap();
        assert_eq!(r.len(), 120);
        assert_eq!(&r.points[..10], &s.points[..10]);
        assert_eq!(&r.points[10..110], &s.points[..]);
        assert_eq!(&r.points[110..], &s.points[90..]);
    }

    #[test]
    fn equal_length_is_identity() {
        let s = line(64);
        assert_eq!(resample_pad(&s, 64).unwrap(), s);
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let s = line(1024);
        let r = resample_pad(&s, 512).unwrap();
        assert_eq!(r.len(), 512);
        for (i, p) in r.points.iter().enumerate() {
            assert_eq!(*p, s.points[i * 1023 / 511]);
        }
        assert_eq!(r.points[511], s.points[1023]);
    }

    #[test]
    fn too_short_input_rejected() {
        assert!(matches!(resample_pad(&line(1), 8), Err(Error::Data(_))));
        assert!(matches!(resample_pad(&line(5), 3), Err(Error::Usage(_))));
    }

    #[test]
    fn tiny_section_pads_to_target() {
        let s = line(2);
        let r = resample_pad(&s, 512).unwrap();
        assert_eq!(r.len(), 512);
        assert_eq!(r.points[0], s.points[0]);
        assert_eq!(r.points[511], s.points[1]);
    }
}
