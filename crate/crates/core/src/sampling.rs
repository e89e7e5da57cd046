//! Area-weighted surface sampling and inside/outside classification.

use alloc::vec::Vec;
use core::f64::consts::PI;
use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::TriangleMesh;
use crate::{par, Error, Result};

/// Samples per squared grid resolution used for the fitting target.
pub const SAMPLES_PER_GRID_AREA: usize = 150;

/// Default number of surface samples for grid resolution `g_s`.
pub fn default_sample_count(grid_resolution: usize) -> usize {
    SAMPLES_PER_GRID_AREA * grid_resolution * grid_resolution
}

/// Points on a surface with the flat normal of the triangle each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfacePointSet {
    pub points: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    pub face_ids: Vec<u32>,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `count` points, choosing triangles proportionally to area and
/// barycentric coordinates uniformly within each triangle.
pub fn sample_surface(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<SurfacePointSet> {
    if count == 0 {
        return Err(Error::ZeroSampleCount);
    }
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let normals: Vec<DVec3> = (0..mesh.faces.len()).map(|f| mesh.face_normal(f)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SurfacePointSet {
        points: Vec::with_capacity(count),
        normals: Vec::with_capacity(count),
        face_ids: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let u: f64 = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= u).min(mesh.faces.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = libm::sqrt(r1);
        let [a, b, c] = mesh.triangle(f);
        out.points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        out.normals.push(normals[f]);
        out.face_ids.push(f as u32);
    }
    Ok(out)
}

/// Signed solid angle subtended by triangle `abc` at the origin
/// (Van Oosterom–Strackee).
#[inline]
pub fn solid_angle(a: DVec3, b: DVec3, c: DVec3) -> f64 {
    let (la, lb, lc) = (a.length(), b.length(), c.length());
    let det = a.dot(b.cross(c));
    let denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * libm::atan2(det, denom)
}

/// Winding number of the mesh around `p`: summed solid angles over 4π.
pub fn winding_number(mesh: &TriangleMesh, p: DVec3) -> f64 {
    let mut total = 0.0;
    for f in &mesh.faces {
        let [a, b, c] = f.map(|v| mesh.vertices[v as usize] - p);
        total += solid_angle(a, b, c);
    }
    total / (4.0 * PI)
}

/// Inside iff the winding number exceeds one half. Boundary points
/// (winding exactly one half) count as outside.
pub fn point_occupancy(mesh: &TriangleMesh, p: DVec3) -> bool {
    winding_number(mesh, p) > 0.5
}

pub fn batch_occupancy(mesh: &TriangleMesh, points: &[DVec3]) -> Vec<bool> {
    par::map(points.len(), |i| point_occupancy(mesh, points[i]))
}
