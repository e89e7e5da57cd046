//! A single Voronoi cell as a convex polytope, built by clipping the clip
//! box with bisector half-spaces.

use alloc::vec;
use alloc::vec::Vec;
use glam::DVec3;

use super::predicates::{keyed_vertex_cut_by, vertex_cut_by};
use super::{ClipBox, Site, VertexKey};
use crate::knn::{KnnScratch, Neighbor, NeighborIndex};
use crate::{Error, Result};

/// Vertices without an exact definition that are closer than this to a
/// cutting plane are treated as lying on it.
pub const ON_PLANE_EPS: f64 = 1e-10;

/// Cells below this volume use the vertex average as barycenter.
pub const DEGENERATE_VOLUME: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq)]
pub struct CellVertex {
    pub position: DVec3,
    pub key: VertexKey,
    /// Bound on the distance of `position` from the exact vertex; infinite
    /// when unknown.
    pub error: f64,
}

/// A face loop in local vertex indices, counter-clockwise seen from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFace {
    pub site: Site,
    pub vertices: Vec<u32>,
    /// Unit outward normal.
    pub normal: DVec3,
    /// Plane offset: points `p` of the cell satisfy `normal . p <= offset`.
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexCell {
    pub generator: u32,
    pub vertices: Vec<CellVertex>,
    pub faces: Vec<CellFace>,
}

/// Volumetric centroid, or the vertex average for degenerate cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barycenter {
    pub point: DVec3,
    pub volume: f64,
    pub degenerate: bool,
}

/// Half-space `normal . x <= offset` bounding the cell of `owner` against `site`.
/// The normal is not normalized.
pub fn site_plane(owner: u32, site: Site, positions: &[DVec3], bbox: &ClipBox) -> (DVec3, f64) {
    match site {
        Site::Generator(j) => {
            let (qi, qj) = (positions[owner as usize], positions[j as usize]);
            (qj - qi, 0.5 * (qj.length_squared() - qi.length_squared()))
        }
        Site::Wall(w) => bbox.wall_plane(w),
    }
}

/// Center of the sphere through four points and a bound on its rounding error.
fn circumcenter(t: [DVec3; 4]) -> Option<(DVec3, f64)> {
    let (a, b, c) = (t[1] - t[0], t[2] - t[0], t[3] - t[0]);
    let det = a.dot(b.cross(c));
    let num = b.cross(c) * a.length_squared() + c.cross(a) * b.length_squared() + a.cross(b) * c.length_squared();
    let offset = num / (2.0 * det);
    let p = t[0] + offset;
    if !p.is_finite() {
        return None;
    }
    // relative conditioning of the 3x3 solve
    let r = det.abs() / (a.length() * b.length() * c.length());
    let scale = offset.length() + a.length().max(b.length()).max(c.length()) + t[0].abs().max_element();
    Some((p, 1e-14 * scale / r))
}

/// Intersection point of the three planes named by a canonical key.
///
/// The key's first entry must be a generator; the other three entries each
/// contribute one plane relative to it. Returns `None` when the planes are
/// (nearly) dependent.
pub fn solve_key(key: &VertexKey, positions: &[DVec3], bbox: &ClipBox) -> Option<DVec3> {
    solve_key_with_error(key, positions, bbox).map(|(p, _)| p)
}

/// [`solve_key`] with a bound on the rounding error of the result.
fn solve_key_with_error(key: &VertexKey, positions: &[DVec3], bbox: &ClipBox) -> Option<(DVec3, f64)> {
    if let Some(tet) = generator_tet(key) {
        return circumcenter(tet.map(|i| positions[i as usize]));
    }
    let Site::Generator(owner) = key[0] else { return None };
    let [(n1, d1), (n2, d2), (n3, d3)] = [key[1], key[2], key[3]].map(|s| site_plane(owner, s, positions, bbox));
    let c23 = n2.cross(n3);
    let det = n1.dot(c23);
    let scale = n1.length() * n2.length() * n3.length();
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    let p = (c23 * d1 + n3.cross(n1) * d2 + n1.cross(n2) * d3) / det;
    let error = 1e-14 * (p.abs().max_element() + 1.0) * scale / det.abs();
    p.is_finite().then_some((p, error))
}

/// The four generators of a key naming no wall, in increasing order.
fn generator_tet(key: &VertexKey) -> Option<[u32; 4]> {
    let mut tet = [0u32; 4];
    for (t, s) in tet.iter_mut().zip(key) {
        let Site::Generator(g) = *s else { return None };
        *t = g;
    }
    (tet[0] < tet[1] && tet[1] < tet[2] && tet[2] < tet[3]).then_some(tet)
}

fn sorted_key(mut sites: [Site; 4]) -> VertexKey {
    sites.sort_unstable();
    sites
}

impl ConvexCell {
    /// The clip box as the starting polytope of generator `owner`.
    pub fn from_box(owner: u32, bbox: &ClipBox, positions: &[DVec3]) -> ConvexCell {
        let vertices = (0..8u8)
            .map(|c| {
                let walls = [c & 1, 2 + ((c >> 1) & 1), 4 + ((c >> 2) & 1)];
                let key = sorted_key([Site::Generator(owner), Site::Wall(walls[0]), Site::Wall(walls[1]), Site::Wall(walls[2])]);
                let position = solve_key(&key, positions, bbox).expect("box corners are well defined");
                CellVertex { position, key, error: 0.0 }
            })
            .collect();
        let loops: [(u8, [u32; 4]); 6] = [
            (0, [0, 4, 6, 2]),
            (1, [1, 3, 7, 5]),
            (2, [0, 1, 5, 4]),
            (3, [2, 6, 7, 3]),
            (4, [0, 2, 3, 1]),
            (5, [4, 5, 7, 6]),
        ];
        let faces = loops
            .iter()
            .map(|&(w, l)| {
                let (n, d) = bbox.wall_plane(w);
                CellFace { site: Site::Wall(w), vertices: l.to_vec(), normal: n, offset: d }
            })
            .collect();
        ConvexCell { generator: owner, vertices, faces }
    }

    /// Largest squared distance from `center` to a vertex.
    pub fn max_radius2(&self, center: DVec3) -> f64 {
        self.vertices.iter().map(|v| v.position.distance_squared(center)).fold(0.0, f64::max)
    }

    pub fn is_clipped(&self) -> bool {
        self.faces.iter().any(|f| matches!(f.site, Site::Wall(_)))
    }

    /// Whether `p` satisfies every face half-space up to `tol`.
    pub fn contains(&self, p: DVec3, tol: f64) -> bool {
        self.faces.iter().all(|f| f.normal.dot(p) - f.offset <= tol)
    }

    pub fn face_points<'a>(&'a self, face: &'a CellFace) -> impl Iterator<Item = DVec3> + Clone + 'a {
        face.vertices.iter().map(move |&v| self.vertices[v as usize].position)
    }

    /// Intersects the cell with `normal . x <= offset`. Returns whether the
    /// cell changed.
    pub fn clip(&mut self, site: Site, normal: DVec3, offset: f64, positions: &[DVec3], bbox: &ClipBox) -> bool {
        let len = normal.length();
        let unit = normal / len;
        let d = offset / len;
        let dist: Vec<f64> = self.vertices.iter().map(|v| unit.dot(v.position) - d).collect();
        // -1 inside, 0 on the plane, +1 outside; exact for generator-only vertices
        let class: Vec<i8> = self
            .vertices
            .iter()
            .zip(&dist)
            .map(|(v, &s)| {
                let float = |tol: f64| if s < -tol { -1 } else if s > tol { 1 } else { 0 };
                let Site::Generator(m) = site else { return float(ON_PLANE_EPS) };
                // decided in floating point when clearly off the plane
                if s.abs() > v.error + 1e-12 {
                    return float(0.0);
                }
                let cut = match generator_tet(&v.key) {
                    Some(tet) => Some(vertex_cut_by(tet, m, positions)),
                    None => keyed_vertex_cut_by(&v.key, m, positions, bbox),
                };
                match cut {
                    Some(true) => 1,
                    Some(false) => -1,
                    None => float(ON_PLANE_EPS),
                }
            })
            .collect();
        if class.iter().all(|&c| c <= 0) {
            return false;
        }

        struct Crossing {
            edge: (u32, u32),
            id: u32,
            planes: [Option<Site>; 2],
        }
        let mut crossings: Vec<Crossing> = Vec::new();
        let mut vertices = core::mem::take(&mut self.vertices);
        let old_count = vertices.len();
        let mut faces: Vec<CellFace> = Vec::with_capacity(self.faces.len() + 1);

        for face in core::mem::take(&mut self.faces) {
            let n = face.vertices.len();
            let mut out = Vec::with_capacity(n + 1);
            let mut strictly_inside = false;
            for idx in 0..n {
                let (a, b) = (face.vertices[idx], face.vertices[(idx + 1) % n]);
                let (ca, cb) = (class[a as usize], class[b as usize]);
                if ca <= 0 {
                    out.push(a);
                    strictly_inside |= ca < 0;
                }
                if ca * cb < 0 {
                    let edge = (a.min(b), a.max(b));
                    let id = match crossings.iter_mut().find(|c| c.edge == edge) {
                        Some(c) => {
                            c.planes[1] = Some(face.site);
                            c.id
                        }
                        None => {
                            let id = vertices.len() as u32;
                            vertices.push(CellVertex { position: DVec3::ZERO, key: [site; 4], error: f64::INFINITY });
                            crossings.push(Crossing { edge, id, planes: [Some(face.site), None] });
                            id
                        }
                    };
                    out.push(id);
                }
            }
            if out.len() >= 3 && strictly_inside {
                faces.push(CellFace { vertices: out, ..face });
            }
        }

        for c in &crossings {
            let (a, b) = (c.edge.0 as usize, c.edge.1 as usize);
            let (pa, pb) = (vertices[a].position, vertices[b].position);
            let t = dist[a] / (dist[a] - dist[b]);
            let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
            let along_edge = pa + (pb - pa) * t;
            let key = match c.planes {
                [Some(f1), Some(f2)] => Some(sorted_key([Site::Generator(self.generator), f1, f2, site])),
                _ => None,
            };
            let key = key.unwrap_or_else(|| sorted_key([Site::Generator(self.generator), site, site, site]));
            // generator-only keys are shared verbatim with the neighbors
            let tet = generator_tet(&key).and_then(|t| circumcenter(t.map(|i| positions[i as usize])));
            let (position, error) = match tet {
                Some((p, e)) => (p, e),
                None => match solve_key_with_error(&key, positions, bbox) {
                    Some((p, e)) if p.distance_squared(along_edge) <= 1e-14 => (p, e),
                    _ => (along_edge, f64::INFINITY),
                },
            };
            vertices[c.id as usize] = CellVertex { position, key, error };
        }

        let on_plane = |v: u32| (v as usize) >= old_count || class[v as usize] == 0;
        let cap = cap_loop(&faces, &vertices, &on_plane, unit);
        if cap.len() >= 3 {
            faces.push(CellFace { site, vertices: cap, normal: unit, offset: d });
        }

        // drop unreferenced vertices and renumber
        let mut remap = vec![u32::MAX; vertices.len()];
        let mut kept = Vec::with_capacity(vertices.len());
        for f in &mut faces {
            for v in &mut f.vertices {
                if remap[*v as usize] == u32::MAX {
                    remap[*v as usize] = kept.len() as u32;
                    kept.push(vertices[*v as usize].clone());
                }
                *v = remap[*v as usize];
            }
        }
        self.vertices = kept;
        self.faces = faces;
        true
    }

    /// Signed volume and volumetric centroid by fanning tetrahedra from the
    /// vertex average.
    pub fn barycenter(&self) -> Barycenter {
        let n = self.vertices.len().max(1) as f64;
        let average = self.vertices.iter().fold(DVec3::ZERO, |acc, v| acc + v.position) / n;
        let mut volume = 0.0;
        let mut moment = DVec3::ZERO;
        for f in &self.faces {
            let p0 = self.vertices[f.vertices[0] as usize].position;
            for k in 1..f.vertices.len().saturating_sub(1) {
                let p1 = self.vertices[f.vertices[k] as usize].position;
                let p2 = self.vertices[f.vertices[k + 1] as usize].position;
                let v = (p0 - average).dot((p1 - average).cross(p2 - average)) / 6.0;
                volume += v;
                moment += (average + p0 + p1 + p2) * (v / 4.0);
            }
        }
        if volume > DEGENERATE_VOLUME {
            Barycenter { point: moment / volume, volume, degenerate: false }
        } else {
            Barycenter { point: average, volume, degenerate: true }
        }
    }
}

/// Boundary of the new face on the cutting plane. Chains the on-plane edges
/// of the clipped faces; falls back to sorting by angle if chaining fails.
fn cap_loop(faces: &[CellFace], vertices: &[CellVertex], on_plane: &impl Fn(u32) -> bool, normal: DVec3) -> Vec<u32> {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for f in faces {
        let n = f.vertices.len();
        for idx in 0..n {
            let (a, b) = (f.vertices[idx], f.vertices[(idx + 1) % n]);
            if on_plane(a) && on_plane(b) {
                edges.push((b, a));
            }
        }
    }
    if edges.len() < 3 {
        return Vec::new();
    }
    if let Some(chain) = chain_edges(&edges) {
        return chain;
    }
    let mut pts: Vec<u32> = edges.iter().map(|e| e.0).collect();
    pts.sort_unstable();
    pts.dedup();
    sort_around(&mut pts, vertices, normal);
    pts
}

fn chain_edges(edges: &[(u32, u32)]) -> Option<Vec<u32>> {
    let succ = |v: u32| {
        let mut it = edges.iter().filter(move |e| e.0 == v);
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some(first.1)
    };
    let start = edges[0].0;
    let mut out = vec![start];
    let mut cur = succ(start)?;
    while cur != start {
        if out.len() > edges.len() {
            return None;
        }
        out.push(cur);
        cur = succ(cur)?;
    }
    (out.len() == edges.len()).then_some(out)
}

/// Orders points counter-clockwise around `normal`.
pub(crate) fn sort_around(ids: &mut [u32], vertices: &[CellVertex], normal: DVec3) {
    let n = ids.len().max(1) as f64;
    let center = ids.iter().fold(DVec3::ZERO, |acc, &v| acc + vertices[v as usize].position) / n;
    let u = normal.any_orthonormal_vector();
    let w = normal.cross(u);
    ids.sort_by(|&a, &b| {
        let angle = |v: u32| {
            let r = vertices[v as usize].position - center;
            libm::atan2(r.dot(w), r.dot(u))
        };
        angle(a).total_cmp(&angle(b))
    });
}

/// Voronoi cell of generator `i` clipped to `bbox`.
///
/// Neighbors are processed in increasing distance; clipping stops once the
/// next neighbor is farther than twice the current cell radius, since its
/// bisector can no longer reach the cell.
pub fn compute_cell(positions: &[DVec3], i: usize, bbox: &ClipBox, index: &NeighborIndex) -> Result<ConvexCell> {
    let mut scratch = KnnScratch::new();
    let mut buf = Vec::new();
    compute_cell_with(positions, i, bbox, index, &mut scratch, &mut buf)
}

pub(crate) fn compute_cell_with(
    positions: &[DVec3],
    i: usize,
    bbox: &ClipBox,
    index: &NeighborIndex,
    scratch: &mut KnnScratch,
    buf: &mut Vec<Neighbor>,
) -> Result<ConvexCell> {
    let qi = positions[i];
    if !bbox.contains(qi) {
        return Err(Error::GeneratorOutsideBox(i));
    }
    let mut cell = ConvexCell::from_box(i as u32, bbox, positions);
    let n = positions.len();
    let mut k = 32.min(n);
    let mut done = 0;
    'grow: loop {
        index.knn_into(qi, k, scratch, buf);
        for nb in &buf[done..] {
            let j = nb.index as usize;
            if j == i {
                continue;
            }
            if nb.dist2 == 0.0 {
                return Err(Error::CoincidentGenerators(i.min(j), i.max(j)));
            }
            if nb.dist2 > 4.0 * cell.max_radius2(qi) * (1.0 + 1e-9) {
                break 'grow;
            }
            let site = Site::Generator(j as u32);
            let (normal, offset) = site_plane(i as u32, site, positions, bbox);
            cell.clip(site, normal, offset, positions, bbox);
        }
        done = buf.len();
        if k >= n {
            break;
        }
        k = (2 * k).min(n);
    }
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> ClipBox {
        ClipBox::new(DVec3::splat(-0.5), DVec3::splat(0.5)).unwrap()
    }

    #[test]
    fn box_cell_volume_and_center() {
        let b = ClipBox::new(DVec3::new(-1.0, 0.0, 2.0), DVec3::new(3.0, 1.0, 4.0)).unwrap();
        let cell = ConvexCell::from_box(0, &b, &[DVec3::new(0.0, 0.5, 3.0)]);
        let bc = cell.barycenter();
        assert!((bc.volume - 8.0).abs() < 1e-12);
        assert!((bc.point - DVec3::new(1.0, 0.5, 3.0)).length() < 1e-12);
        assert!(!bc.degenerate);
    }

    #[test]
    fn two_generators_split_box_in_half() {
        let q = [DVec3::new(-0.25, 0.0, 0.0), DVec3::new(0.25, 0.0, 0.0)];
        let idx = NeighborIndex::new(&q);
        for i in 0..2 {
            let c = compute_cell(&q, i, &unit_box(), &idx).unwrap();
            let bc = c.barycenter();
            assert!((bc.volume - 0.5).abs() < 1e-12);
            assert!((bc.point.x - if i == 0 { -0.25 } else { 0.25 }).abs() < 1e-12);
            assert_eq!(c.faces.len(), 6);
            assert_eq!(c.vertices.len(), 8);
            assert!(c.faces.iter().any(|f| f.site == Site::Generator(1 - i as u32)));
        }
    }

    #[test]
    fn octants() {
        let q: Vec<DVec3> = (0..8)
            .map(|c| DVec3::new(
                if c & 1 == 0 { -0.25 } else { 0.25 },
                if c & 2 == 0 { -0.25 } else { 0.25 },
                if c & 4 == 0 { -0.25 } else { 0.25 },
            ))
            .collect();
        let idx = NeighborIndex::new(&q);
        for i in 0..8 {
            let c = compute_cell(&q, i, &unit_box(), &idx).unwrap();
            let bc = c.barycenter();
            assert!((bc.volume - 0.125).abs() < 1e-12);
            assert!((bc.point - q[i]).length() < 1e-12);
            // the shared corner splits into several coincident vertices
            let mut distinct: Vec<DVec3> = Vec::new();
            for v in &c.vertices {
                if !distinct.iter().any(|d| d.distance(v.position) < 1e-12) {
                    distinct.push(v.position);
                }
            }
            assert_eq!(distinct.len(), 8, "cell {i}");
            let area = |f: &CellFace| crate::mesh::polygon_area_vector(c.face_points(f)).length();
            assert_eq!(c.faces.iter().filter(|f| area(f) > 1e-12).count(), 6);
        }
    }

    #[test]
    fn regular_tetrahedron_barycenter() {
        // a cell cut down to a tetrahedron by four planes
        let b = ClipBox::new(DVec3::splat(-2.0), DVec3::splat(2.0)).unwrap();
        let corners = [DVec3::new(1.0, 1.0, 1.0), DVec3::new(1.0, -1.0, -1.0), DVec3::new(-1.0, 1.0, -1.0), DVec3::new(-1.0, -1.0, 1.0)];
        let mut cell = ConvexCell::from_box(0, &b, &[DVec3::ZERO]);
        for (w, c) in corners.iter().enumerate() {
            // plane through the face opposite corner c
            let n = -*c;
            let d = n.dot(corners[(w + 1) % 4]);
            cell.clip(Site::Wall(0), n, d, &[DVec3::ZERO], &b);
        }
        let bc = cell.barycenter();
        assert_eq!(cell.vertices.len(), 4);
        assert!((bc.volume - 8.0 / 3.0).abs() < 1e-12);
        assert!(bc.point.length() < 1e-12);
    }

    #[test]
    fn plane_through_vertices_does_not_split_them() {
        let mut cell = ConvexCell::from_box(0, &unit_box(), &[DVec3::ZERO]);
        // diagonal plane x + y <= 0 passes through two box edges
        cell.clip(Site::Wall(0), DVec3::new(1.0, 1.0, 0.0), 0.0, &[DVec3::ZERO], &unit_box());
        assert_eq!(cell.vertices.len(), 6);
        assert_eq!(cell.faces.len(), 5);
        assert!((cell.barycenter().volume - 0.5).abs() < 1e-12);
        // touching plane is a no-op
        let before = cell.clone();
        assert!(!cell.clip(Site::Wall(1), DVec3::X, 0.5, &[DVec3::ZERO], &unit_box()));
        assert_eq!(before, cell);
    }

    #[test]
    fn coincident_generators_are_reported() {
        let q = [DVec3::ZERO, DVec3::X * 0.1, DVec3::ZERO];
        let idx = NeighborIndex::new(&q);
        assert_eq!(compute_cell(&q, 2, &unit_box(), &idx).unwrap_err(), Error::CoincidentGenerators(0, 2));
    }

    #[test]
    fn generator_outside_box() {
        let q = [DVec3::ZERO, DVec3::X];
        let idx = NeighborIndex::new(&q);
        assert_eq!(compute_cell(&q, 1, &unit_box(), &idx).unwrap_err(), Error::GeneratorOutsideBox(1));
    }
}
