use crate::error::{Error, Result};

pub type Point3 = [f64; 3];
pub type Triangle = [Point3; 3];

/// Triangle soup in millimetres. No connectivity or orientation is assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub id: String,
    triangles: Vec<Triangle>,
}

impl TriangleMesh {
    pub fn new(id: impl Into<String>, triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::data("mesh has no triangles"));
        }
        if let Some(i) = triangles
            .iter()
            .position(|t| t.iter().flatten().any(|c| !c.is_finite()))
        {
            return Err(Error::data(format!("triangle {i} has a non-finite vertex")));
        }
        Ok(TriangleMesh {
            id: id.into(),
            triangles,
        })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn translated(&self, offset: Point3) -> TriangleMesh {
        let triangles = self
            .triangles
            .iter()
            .map(|t| t.map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]))
            .collect();
        TriangleMesh {
            id: self.id.clone(),
            triangles,
        }
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Triangle>) {
        self.triangles.extend(other);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn extent(&self) -> Point3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

pub fn bounding_box(mesh: &TriangleMesh) -> Result<BoundingBox> {
    let mut points = mesh.triangles().iter().flatten();
    let first = points
        .next()
        .ok_or_else(|| Error::data("bounding box of an empty mesh"))?;
    let (mut min, mut max) = (*first, *first);
    for p in points {
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    Ok(BoundingBox { min, max })
}

/// Axis-aligned box as 12 outward-facing triangles.
pub fn box_triangles(min: Point3, max: Point3) -> Vec<Triangle> {
    let c = |i: usize| -> Point3 {
        [
            if i & 1 == 0 { min[0] } else { max[0] },
            if i & 2 == 0 { min[1] } else { max[1] },
            if i & 4 == 0 { min[2] } else { max[2] },
        ]
    };
    // Quads as corner indices, counter-clockwise seen from outside.
    let quads = [
        [0, 2, 3, 1], // z min
        [4, 5, 7, 6], // z max
        [0, 1, 5, 4], // y min
        [2, 6, 7, 3], // y max
        [0, 4, 6, 2], // x min
        [1, 3, 7, 5], // x max
    ];
    quads
        .iter()
        .flat_map(|q| [[c(q[0]), c(q[1]), c(q[2])], [c(q[0]), c(q[2]), c(q[3])]])
        .collect()
}
