//! Watertightness report: edge incidence, orientation and self-intersections.

use alloc::vec::Vec;
use glam::DVec3;

use super::intersect::{is_degenerate, triangles_intersect};
use super::VoroMeshSurface;
use crate::par;

/// Self-intersecting triangle pairs kept as examples in the report.
const MAX_REPORTED_PAIRS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WatertightReport {
    pub vertex_count: usize,
    pub face_count: usize,
    pub edge_count: usize,
    /// Every undirected edge has exactly two incident faces.
    pub edge_manifold: bool,
    /// No edge has a single incident face.
    pub closed: bool,
    /// Every two-face edge is traversed once in each direction.
    pub consistently_oriented: bool,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub misoriented_edges: usize,
    /// Faces with fewer than three distinct vertices.
    pub degenerate_faces: usize,
    /// Zero-area triangles of the fan triangulation, left out of the intersection test.
    pub degenerate_triangles: usize,
    /// Intersecting pairs of fan triangles from different faces.
    pub self_intersections: usize,
    /// Up to a few intersecting pairs as face indices.
    pub intersecting_faces: Vec<(u32, u32)>,
}

impl WatertightReport {
    pub fn is_watertight(&self) -> bool {
        self.edge_manifold && self.closed && self.consistently_oriented && self.self_intersections == 0
    }
}

struct Triangle {
    face: u32,
    points: [DVec3; 3],
    lo: DVec3,
    hi: DVec3,
}

/// Triangulates each face as a fan around its vertex average, which keeps
/// every triangle non-degenerate for convex faces with collinear corners.
fn fan_triangles(mesh: &VoroMeshSurface) -> Vec<Triangle> {
    let mut out = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        let pts: Vec<DVec3> = face.iter().map(|&v| mesh.vertices[v as usize]).collect();
        let mut push = |points: [DVec3; 3]| {
            let lo = points[0].min(points[1]).min(points[2]);
            let hi = points[0].max(points[1]).max(points[2]);
            out.push(Triangle { face: f as u32, points, lo, hi });
        };
        match pts.len() {
            0..=2 => {}
            3 => push([pts[0], pts[1], pts[2]]),
            n => {
                let c = pts.iter().copied().sum::<DVec3>() / n as f64;
                for k in 0..n {
                    push([c, pts[k], pts[(k + 1) % n]]);
                }
            }
        }
    }
    out
}

fn count_self_intersections(tris: &[Triangle]) -> (usize, Vec<(u32, u32)>) {
    if tris.len() < 2 {
        return (0, Vec::new());
    }
    let lo = tris.iter().fold(DVec3::splat(f64::INFINITY), |a, t| a.min(t.lo));
    let hi = tris.iter().fold(DVec3::splat(f64::NEG_INFINITY), |a, t| a.max(t.hi));
    let mean_size = tris.iter().map(|t| (t.hi - t.lo).max_element()).sum::<f64>() / tris.len() as f64;
    let extent = (hi - lo).max_element();
    let cell = (mean_size * 2.0).max(extent / 256.0).max(f64::MIN_POSITIVE);
    let coord = |x: DVec3| {
        let q = ((x - lo) / cell).floor();
        [q.x as u32, q.y as u32, q.z as u32]
    };
    let ranges: Vec<([u32; 3], [u32; 3])> = tris.iter().map(|t| (coord(t.lo), coord(t.hi))).collect();

    let mut entries: Vec<([u32; 3], u32)> = Vec::new();
    for (i, (a, b)) in ranges.iter().enumerate() {
        for x in a[0]..=b[0] {
            for y in a[1]..=b[1] {
                for z in a[2]..=b[2] {
                    entries.push(([x, y, z], i as u32));
                }
            }
        }
    }
    entries.sort_unstable();
    let mut buckets: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    for e in 1..=entries.len() {
        if e == entries.len() || entries[e].0 != entries[s].0 {
            if e - s > 1 {
                buckets.push((s, e));
            }
            s = e;
        }
    }

    let results = par::map(buckets.len(), |bi| {
        let (s, e) = buckets[bi];
        let key = entries[s].0;
        let mut hits = Vec::new();
        for a in s..e {
            for b in a + 1..e {
                let (i, j) = (entries[a].1 as usize, entries[b].1 as usize);
                let (ti, tj) = (&tris[i], &tris[j]);
                if ti.face == tj.face || ti.lo.cmpgt(tj.hi).any() || tj.lo.cmpgt(ti.hi).any() {
                    continue;
                }
                // test each pair only in the lowest bucket both share
                let first = [0, 1, 2].map(|k| ranges[i].0[k].max(ranges[j].0[k]));
                if first != key {
                    continue;
                }
                if triangles_intersect(&ti.points, &tj.points) {
                    hits.push((ti.face.min(tj.face), ti.face.max(tj.face)));
                }
            }
        }
        hits
    });
    let mut count = 0;
    let mut examples = Vec::new();
    for hits in results {
        count += hits.len();
        for h in hits {
            if examples.len() < MAX_REPORTED_PAIRS && !examples.contains(&h) {
                examples.push(h);
            }
        }
    }
    (count, examples)
}

pub fn check_watertight(mesh: &VoroMeshSurface) -> WatertightReport {
    let mut report = WatertightReport {
        vertex_count: mesh.vertices.len(),
        face_count: mesh.faces.len(),
        ..Default::default()
    };

    // (undirected edge, forward?)
    let mut half: Vec<((u32, u32), bool)> = Vec::new();
    for face in &mesh.faces {
        let mut distinct = face.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            report.degenerate_faces += 1;
        }
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            if a != b {
                half.push(((a.min(b), a.max(b)), a < b));
            }
        }
    }
    half.sort_unstable();
    let mut s = 0;
    while s < half.len() {
        let mut e = s;
        while e < half.len() && half[e].0 == half[s].0 {
            e += 1;
        }
        report.edge_count += 1;
        match e - s {
            1 => report.boundary_edges += 1,
            2 => {
                if half[s].1 == half[s + 1].1 {
                    report.misoriented_edges += 1;
                }
            }
            _ => report.nonmanifold_edges += 1,
        }
        s = e;
    }
    report.closed = report.boundary_edges == 0;
    report.edge_manifold = report.boundary_edges == 0 && report.nonmanifold_edges == 0;
    report.consistently_oriented = report.misoriented_edges == 0;

    let (tris, degenerate): (Vec<Triangle>, Vec<Triangle>) =
        fan_triangles(mesh).into_iter().partition(|t| !is_degenerate(&t.points));
    report.degenerate_triangles = degenerate.len();
    let (count, examples) = count_self_intersections(&tris);
    report.self_intersections = count;
    report.intersecting_faces = examples;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::FacePair;
    use crate::mesh::PolygonMesh;
    use crate::shapes;

    fn surface(m: PolygonMesh) -> VoroMeshSurface {
        let n = m.faces.len();
        VoroMeshSurface {
            vertices: m.vertices,
            faces: m.faces,
            face_pair: alloc::vec![FacePair { inside: 0, outside: None }; n],
        }
    }

    fn tri_surface(m: crate::mesh::TriangleMesh) -> VoroMeshSurface {
        surface(PolygonMesh { vertices: m.vertices, faces: m.faces.iter().map(|f| f.to_vec()).collect() })
    }

    #[test]
    fn cube_is_watertight() {
        let r = check_watertight(&surface(shapes::unit_cube_quads()));
        assert!(r.is_watertight(), "{r:?}");
        assert_eq!((r.vertex_count, r.edge_count, r.face_count), (8, 12, 6));
    }

    #[test]
    fn sphere_is_watertight() {
        let r = check_watertight(&tri_surface(shapes::icosphere(3, 0.5)));
        assert!(r.is_watertight(), "{r:?}");
        assert_eq!(r.vertex_count + r.face_count - r.edge_count, 2);
    }

    #[test]
    fn deleted_face_leaves_boundary() {
        let mut s = surface(shapes::unit_cube_quads());
        s.faces.pop();
        let r = check_watertight(&s);
        assert!(!r.edge_manifold && !r.closed);
        assert_eq!(r.boundary_edges, 4);
        assert!(r.consistently_oriented);
    }

    #[test]
    fn flipped_face_is_misoriented() {
        let mut s = surface(shapes::unit_cube_quads());
        s.faces[0].reverse();
        let r = check_watertight(&s);
        assert!(r.edge_manifold);
        assert_eq!(r.misoriented_edges, 4);
    }

    #[test]
    fn interpenetrating_tetrahedra() {
        let a = shapes::tetrahedron([
            DVec3::new(1.0, 1.0, 1.0),
            DVec3::new(1.0, -1.0, -1.0),
            DVec3::new(-1.0, 1.0, -1.0),
            DVec3::new(-1.0, -1.0, 1.0),
        ]);
        let b = a.transformed(&crate::mesh::NormalizationTransform { scale: 1.0, translation: DVec3::new(0.5, 0.3, 0.1) });
        let mut m = a.clone();
        m.vertices.extend(&b.vertices);
        m.faces.extend(b.faces.iter().map(|f| f.map(|v| v + 4)));
        let s = tri_surface(m);
        let r = check_watertight(&s);
        assert!(r.self_intersections > 0);

        // brute force over all pairs of distinct faces
        let mut brute = 0;
        for i in 0..s.faces.len() {
            for j in i + 1..s.faces.len() {
                let ti: [DVec3; 3] = core::array::from_fn(|k| s.vertices[s.faces[i][k] as usize]);
                let tj: [DVec3; 3] = core::array::from_fn(|k| s.vertices[s.faces[j][k] as usize]);
                if triangles_intersect(&ti, &tj) {
                    brute += 1;
                }
            }
        }
        assert_eq!(r.self_intersections, brute);
        assert_eq!(r.intersecting_faces.len(), brute);
    }
}
