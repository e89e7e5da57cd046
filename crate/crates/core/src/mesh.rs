//! Triangle and polygon meshes, plus the normalization into the unit box.

use alloc::vec::Vec;
use glam::DVec3;

use crate::{Error, Result};

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub fn from_points(points: &[DVec3]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut bb = Aabb { min: first, max: first };
        for &p in &points[1..] {
            bb.min = bb.min.min(p);
            bb.max = bb.max.max(p);
        }
        Some(bb)
    }

    pub fn extent(&self) -> DVec3 {
        self.max - self.min
    }

    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }
}

/// Counts gathered while validating faces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Faces dropped because they repeat a vertex index.
    pub degenerate_dropped: usize,
    /// Faces kept although their area is zero (distinct but collinear corners).
    pub zero_area: usize,
    /// Polygons with more than three corners that were fan-triangulated.
    pub triangulated_polygons: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<DVec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh from raw triangles, enforcing the index invariants.
    pub fn new(vertices: Vec<DVec3>, faces: Vec<[u32; 3]>) -> Result<(TriangleMesh, LoadReport)> {
        let polys: Vec<Vec<u32>> = faces.iter().map(|f| f.to_vec()).collect();
        TriangleMesh::from_polygons(vertices, &polys)
    }

    /// Fan-triangulates polygons and validates indices.
    ///
    /// Polygons that repeat a vertex index are dropped and counted as degenerate.
    pub fn from_polygons(vertices: Vec<DVec3>, polygons: &[Vec<u32>]) -> Result<(TriangleMesh, LoadReport)> {
        let mut report = LoadReport::default();
        let mut faces = Vec::with_capacity(polygons.len());
        for (fi, poly) in polygons.iter().enumerate() {
            if let Some(&bad) = poly.iter().find(|&&v| v as usize >= vertices.len()) {
                return Err(Error::FaceIndexOutOfRange { face: fi, index: bad, count: vertices.len() });
            }
            let repeated = poly.len() < 3
                || poly.iter().enumerate().any(|(a, va)| poly[a + 1..].contains(va));
            if repeated {
                report.degenerate_dropped += 1;
                continue;
            }
            if poly.len() > 3 {
                report.triangulated_polygons += 1;
            }
            for k in 1..poly.len() - 1 {
                let tri = [poly[0], poly[k], poly[k + 1]];
                let [a, b, c] = tri.map(|v| vertices[v as usize]);
                if (b - a).cross(c - a).length_squared() == 0.0 {
                    report.zero_area += 1;
                }
                faces.push(tri);
            }
        }
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok((TriangleMesh { vertices, faces }, report))
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [DVec3; 3] {
        self.faces[f].map(|v| self.vertices[v as usize])
    }

    pub fn triangle_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(c - a).length()
    }

    /// Unit geometric normal of face `f`, or zero for a degenerate face.
    pub fn face_normal(&self, f: usize) -> DVec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(c - a).normalize_or_zero()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    pub fn transformed(&self, t: &NormalizationTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&p| t.apply(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Number of undirected edges not shared by exactly two faces.
    pub fn non_manifold_edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        let mut bad = 0;
        let mut i = 0;
        while i < edges.len() {
            let mut j = i;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i != 2 {
                bad += 1;
            }
            i = j;
        }
        bad
    }
}

/// Maps original coordinates `p` to `scale * (p + translation)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: DVec3,
}

impl NormalizationTransform {
    pub const IDENTITY: NormalizationTransform =
        NormalizationTransform { scale: 1.0, translation: DVec3::ZERO };

    #[inline]
    pub fn apply(&self, p: DVec3) -> DVec3 {
        (p + self.translation) * self.scale
    }

    #[inline]
    pub fn invert(&self, p: DVec3) -> DVec3 {
        p / self.scale - self.translation
    }
}

/// Centers the bounding box at the origin and scales its longest side to 1.
pub fn normalize(mesh: &TriangleMesh) -> Result<(TriangleMesh, NormalizationTransform)> {
    let bb = mesh.bounds().ok_or(Error::EmptyMesh)?;
    let longest = bb.extent().max_element();
    if !(longest > 0.0) || !longest.is_finite() {
        return Err(Error::ZeroExtent);
    }
    let t = NormalizationTransform { scale: 1.0 / longest, translation: -bb.center() };
    Ok((mesh.transformed(&t), t))
}

/// Mesh with arbitrary planar polygon faces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolygonMesh {
    pub vertices: Vec<DVec3>,
    pub faces: Vec<Vec<u32>>,
}

impl PolygonMesh {
    /// Fan triangulation from the first corner of each face.
    pub fn triangulate(&self) -> Vec<[u32; 3]> {
        let mut tris = Vec::new();
        for f in &self.faces {
            for k in 1..f.len().saturating_sub(1) {
                tris.push([f[0], f[k], f[k + 1]]);
            }
        }
        tris
    }

    /// Converts to a triangle mesh without validation (faces may be degenerate).
    pub fn to_triangle_mesh(&self) -> TriangleMesh {
        TriangleMesh { vertices: self.vertices.clone(), faces: self.triangulate() }
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangulate()
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v as usize]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }
}

/// Area vector of a polygon (Newell's method); its length is the area.
pub fn polygon_area_vector(points: impl IntoIterator<Item = DVec3> + Clone) -> DVec3 {
    let mut it = points.clone().into_iter();
    let Some(first) = it.next() else { return DVec3::ZERO };
    let mut acc = DVec3::ZERO;
    let mut prev = first;
    for p in it {
        acc += prev.cross(p);
        prev = p;
    }
    acc += prev.cross(first);
    acc * 0.5
}
