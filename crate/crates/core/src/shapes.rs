//! Procedural test shapes: boxes, icospheres, tori, squares.
//!
//! All closed shapes are outward oriented.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use glam::DVec3;

use crate::mesh::{PolygonMesh, TriangleMesh};

/// Axis-aligned box as six quads, outward oriented.
pub fn box_quads(min: DVec3, max: DVec3) -> PolygonMesh {
    let vertices = (0..8)
        .map(|i| {
            DVec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let faces = vec![
        vec![0, 4, 6, 2], // -x
        vec![1, 3, 7, 5], // +x
        vec![0, 1, 5, 4], // -y
        vec![2, 6, 7, 3], // +y
        vec![0, 2, 3, 1], // -z
        vec![4, 5, 7, 6], // +z
    ];
    PolygonMesh { vertices, faces }
}

pub fn box_mesh(min: DVec3, max: DVec3) -> TriangleMesh {
    box_quads(min, max).to_triangle_mesh()
}

/// Unit cube `[-0.5, 0.5]^3` as quads.
pub fn unit_cube_quads() -> PolygonMesh {
    box_quads(DVec3::splat(-0.5), DVec3::splat(0.5))
}

/// Unit cube `[-0.5, 0.5]^3`, 8 vertices and 12 triangles.
pub fn unit_cube() -> TriangleMesh {
    unit_cube_quads().to_triangle_mesh()
}

/// Icosahedron refined `subdivisions` times, projected onto a sphere.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut vertices: Vec<DVec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| DVec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: Vec<((u32, u32), u32)> = Vec::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<DVec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            match midpoints.binary_search_by_key(&key, |e| e.0) {
                Ok(i) => midpoints[i].1,
                Err(i) => {
                    let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                    vertices.push(m);
                    let id = (vertices.len() - 1) as u32;
                    midpoints.insert(i, (key, id));
                    id
                }
            }
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriangleMesh { vertices, faces }
}

/// Torus around the z axis with `major` ring segments and `minor` tube segments.
pub fn torus(major_radius: f64, minor_radius: f64, major: u32, minor: u32) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((major * minor) as usize);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = major_radius + minor_radius * libm::cos(v);
            vertices.push(DVec3::new(r * libm::cos(u), r * libm::sin(u), minor_radius * libm::sin(v)));
        }
    }
    let id = |i: u32, j: u32| (i % major) * minor + (j % minor);
    let mut faces = Vec::with_capacity((2 * major * minor) as usize);
    for i in 0..major {
        for j in 0..minor {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh { vertices, faces }
}

/// Square of side `size` in the plane `z = height`, normal +z, two triangles.
pub fn square(size: f64, height: f64) -> TriangleMesh {
    let h = size / 2.0;
    TriangleMesh {
        vertices: vec![
            DVec3::new(-h, -h, height),
            DVec3::new(h, -h, height),
            DVec3::new(h, h, height),
            DVec3::new(-h, h, height),
        ],
        faces: vec![[0, 1, 2], [0, 2, 3]],
    }
}

/// Tetrahedron with outward orientation regardless of the corner order.
pub fn tetrahedron(corners: [DVec3; 4]) -> TriangleMesh {
    let [a, b, c, d] = corners;
    let mut faces = vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [0, 2, 3]];
    if (b - a).cross(c - a).dot(d - a) > 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    TriangleMesh { vertices: corners.to_vec(), faces }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_closure() {
        let s = icosphere(3, 1.0);
        assert_eq!(s.vertices.len(), 642);
        assert_eq!(s.faces.len(), 1280);
        assert_eq!(s.non_manifold_edge_count(), 0);
        let v = s.signed_volume();
        assert!(v > 4.0 && v < 4.0 * PI / 3.0);
    }

    #[test]
    fn torus_is_closed_and_outward() {
        let t = torus(0.35, 0.15, 48, 24);
        assert_eq!(t.non_manifold_edge_count(), 0);
        let exact = 2.0 * PI * PI * 0.35 * 0.15 * 0.15;
        let v = t.signed_volume();
        assert!(v > 0.95 * exact && v < exact);
    }

    #[test]
    fn tetrahedron_is_outward() {
        let t = tetrahedron([DVec3::ZERO, DVec3::Y, DVec3::X, DVec3::Z]);
        assert!((t.signed_volume() - 1.0 / 6.0).abs() < 1e-15);
    }
}
