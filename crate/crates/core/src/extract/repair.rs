//! Splitting of non-manifold edges and vertices.
//!
//! Degenerate generator configurations (cospherical, as on a lattice) let
//! inside cells touch along a single edge or at a single vertex. Every
//! undirected edge with more than two incident faces has its faces paired so
//! that each pair bounds one inside wedge around the edge. Face corners at a
//! vertex are then grouped into fans connected through paired edges, and each
//! fan beyond the first gets its own copy of the vertex.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use glam::DVec3;

use super::VoroMeshSurface;

/// Offset of an inserted midpoint relative to its edge length.
pub const MIDPOINT_OFFSET: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RepairReport {
    /// Edges that had more than two incident faces.
    pub nonmanifold_edges: usize,
    /// Vertex copies added to separate fans.
    pub duplicated_vertices: usize,
    /// Edges whose endpoints stayed shared after fan splitting, separated by
    /// inserting a vertex near the edge midpoint.
    pub midpoint_splits: usize,
}

struct Corners {
    offsets: Vec<usize>,
    face_of: Vec<u32>,
}

impl Corners {
    fn new(faces: &[Vec<u32>]) -> Corners {
        let mut offsets = Vec::with_capacity(faces.len() + 1);
        let mut face_of = Vec::new();
        offsets.push(0);
        for (f, face) in faces.iter().enumerate() {
            face_of.extend(core::iter::repeat(f as u32).take(face.len()));
            offsets.push(face_of.len());
        }
        Corners { offsets, face_of }
    }

    fn len(&self) -> usize {
        self.face_of.len()
    }

    fn split(&self, h: usize) -> (usize, usize) {
        let f = self.face_of[h] as usize;
        (f, h - self.offsets[f])
    }

    /// Corner following `h` in its face.
    fn next(&self, h: usize) -> usize {
        let f = self.face_of[h] as usize;
        if h + 1 == self.offsets[f + 1] {
            self.offsets[f]
        } else {
            h + 1
        }
    }
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind((0..n as u32).collect())
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            self.0[x as usize] = self.0[self.0[x as usize] as usize];
            x = self.0[x as usize];
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b) as usize] = a.min(b);
        }
    }
}

/// Half-edges grouped by undirected edge, each group sorted by half-edge id.
fn edge_groups(faces: &[Vec<u32>], corners: &Corners) -> Vec<((u32, u32), Vec<usize>)> {
    let mut entries: Vec<((u32, u32), usize)> = (0..corners.len())
        .map(|h| {
            let (f, c) = corners.split(h);
            let a = faces[f][c];
            let b = faces[f][(c + 1) % faces[f].len()];
            ((a.min(b), a.max(b)), h)
        })
        .filter(|(e, _)| e.0 != e.1)
        .collect();
    entries.sort_unstable();
    let mut groups: Vec<((u32, u32), Vec<usize>)> = Vec::new();
    for (e, h) in entries {
        match groups.last_mut() {
            Some((last, hs)) if *last == e => hs.push(h),
            _ => groups.push((e, alloc::vec![h])),
        }
    }
    groups
}

fn start(faces: &[Vec<u32>], corners: &Corners, h: usize) -> u32 {
    let (f, c) = corners.split(h);
    faces[f][c]
}

/// Two half-edges bounding one wedge around an edge, with a unit direction
/// pointing into that wedge (zero when unknown).
#[derive(Clone, Copy)]
struct EdgePair {
    first: usize,
    second: usize,
    into_wedge: DVec3,
}

/// Pairs the half-edges around edge `(a, b)` so that consecutive faces in
/// angular order enclose an inside wedge. Falls back to pairing opposite
/// directions in id order when the angular order does not alternate.
fn pair_around_edge(mesh: &VoroMeshSurface, corners: &Corners, (a, b): (u32, u32), hs: &[usize]) -> Vec<EdgePair> {
    let (pa, pb) = (mesh.vertices[a as usize], mesh.vertices[b as usize]);
    let d = (pb - pa).normalize_or_zero();
    let (x, y) = d.any_orthonormal_pair();
    // (angle, forward, half-edge)
    let mut around: Vec<(f64, bool, usize)> = hs
        .iter()
        .map(|&h| {
            let (f, _) = corners.split(h);
            let mut best = DVec3::ZERO;
            for p in mesh.face_points(f) {
                let r = p - pa;
                let w = r - d * r.dot(d);
                if w.length_squared() > best.length_squared() {
                    best = w;
                }
            }
            let forward = start(&mesh.faces, corners, h) == a;
            (libm::atan2(best.dot(y), best.dot(x)), forward, h)
        })
        .collect();
    around.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.2.cmp(&q.2)));
    let dir = |angle: f64| x * libm::cos(angle) + y * libm::sin(angle);

    let n = around.len();
    let forward_count = around.iter().filter(|e| e.1).count();
    if n % 2 == 0 && forward_count * 2 == n {
        // a backward half-edge has the inside wedge right after it (counter-clockwise about a->b)
        for shift in 0..2 {
            let at = |k: usize| around[(k + shift) % n];
            if (0..n / 2).all(|k| !at(2 * k).1 && at(2 * k + 1).1) {
                return (0..n / 2)
                    .map(|k| {
                        let (p, q) = (at(2 * k), at(2 * k + 1));
                        let span = libm::fmod(q.0 - p.0 + TAU, TAU);
                        EdgePair { first: p.2, second: q.2, into_wedge: dir(p.0 + span / 2.0) }
                    })
                    .collect();
            }
        }
    }

    let mut fwd: Vec<usize> = around.iter().filter(|e| e.1).map(|e| e.2).collect();
    let mut bwd: Vec<usize> = around.iter().filter(|e| !e.1).map(|e| e.2).collect();
    fwd.sort_unstable();
    bwd.sort_unstable();
    let m = fwd.len().min(bwd.len());
    let rest: Vec<usize> = fwd[m..].iter().chain(&bwd[m..]).copied().collect();
    fwd[..m]
        .iter()
        .zip(&bwd[..m])
        .map(|(&p, &q)| (p, q))
        .chain(rest.chunks_exact(2).map(|c| (c[0], c[1])))
        .map(|(first, second)| EdgePair { first, second, into_wedge: DVec3::ZERO })
        .collect()
}

/// Makes every edge and vertex of a closed surface manifold by duplicating
/// vertices. A surface that is already manifold comes back unchanged.
pub fn repair_nonmanifold(mesh: &VoroMeshSurface) -> (VoroMeshSurface, RepairReport) {
    let mut report = RepairReport::default();
    let corners = Corners::new(&mesh.faces);
    let groups = edge_groups(&mesh.faces, &corners);

    let mut uf = UnionFind::new(corners.len());
    let mut extra_pairs: Vec<Vec<EdgePair>> = Vec::new();
    for (edge, hs) in &groups {
        let pairs = match hs.len() {
            1 => continue,
            2 => alloc::vec![EdgePair { first: hs[0], second: hs[1], into_wedge: DVec3::ZERO }],
            _ => {
                report.nonmanifold_edges += 1;
                let p = pair_around_edge(mesh, &corners, *edge, hs);
                extra_pairs.push(p.clone());
                p
            }
        };
        for EdgePair { first: h1, second: h2, .. } in pairs {
            let (s1, e1) = (h1, corners.next(h1));
            let (s2, e2) = (h2, corners.next(h2));
            if start(&mesh.faces, &corners, s1) == start(&mesh.faces, &corners, s2) {
                uf.union(s1 as u32, s2 as u32);
                uf.union(e1 as u32, e2 as u32);
            } else {
                uf.union(s1 as u32, e2 as u32);
                uf.union(e1 as u32, s2 as u32);
            }
        }
    }

    // one vertex id per (vertex, fan)
    let mut vertices = mesh.vertices.clone();
    let mut fan_ids: alloc::collections::BTreeMap<(u32, u32), u32> = alloc::collections::BTreeMap::new();
    let mut first_fan: Vec<u32> = alloc::vec![u32::MAX; mesh.vertices.len()];
    let mut corner_vertex = Vec::with_capacity(corners.len());
    for h in 0..corners.len() {
        let v = start(&mesh.faces, &corners, h);
        let root = uf.find(h as u32);
        let id = *fan_ids.entry((v, root)).or_insert_with(|| {
            if first_fan[v as usize] == u32::MAX {
                first_fan[v as usize] = root;
                v
            } else {
                vertices.push(mesh.vertices[v as usize]);
                (vertices.len() - 1) as u32
            }
        });
        corner_vertex.push(id);
    }
    report.duplicated_vertices = vertices.len() - mesh.vertices.len();

    let mut faces: Vec<Vec<u32>> = (0..mesh.faces.len())
        .map(|f| corner_vertex[corners.offsets[f]..corners.offsets[f + 1]].to_vec())
        .collect();

    // pairs that still share both endpoints after splitting
    let mut inserts: Vec<(usize, usize, u32)> = Vec::new();
    for pairs in &extra_pairs {
        let mut seen: Vec<(u32, u32)> = Vec::new();
        for &EdgePair { first: h1, second: h2, into_wedge } in pairs {
            let (a, b) = (corner_vertex[h1], corner_vertex[corners.next(h1)]);
            let key = (a.min(b), a.max(b));
            if !seen.contains(&key) {
                seen.push(key);
                continue;
            }
            report.midpoint_splits += 1;
            // nudged into the wedge so the two sheets only meet at the endpoints
            let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
            vertices.push((pa + pb) * 0.5 + into_wedge * (MIDPOINT_OFFSET * pa.distance(pb)));
            let m = (vertices.len() - 1) as u32;
            for h in [h1, h2] {
                let (f, c) = corners.split(h);
                inserts.push((f, c, m));
            }
        }
    }
    inserts.sort_unstable_by(|p, q| q.cmp(p));
    for (f, c, m) in inserts {
        faces[f].insert(c + 1, m);
    }

    (VoroMeshSurface { vertices, faces, face_pair: mesh.face_pair.clone() }, report)
}
