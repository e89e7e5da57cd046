//! Clipped 3D Voronoi diagram.
//!
//! Cells are computed independently by half-space clipping. The side of a
//! bisector a vertex falls on is decided exactly, with ties broken by a
//! symbolic perturbation, so neighboring cells agree on the structure they
//! share. Shared vertices are identified through canonical keys: the sorted
//! set of the four sites (generators or clip-box walls) whose planes meet
//! there. Every incident cell computes a keyed vertex from the same key, so
//! the coordinates agree bit for bit. Distinct vertices that coincide, as
//! they do where more than four generators are cospherical, are merged when
//! within [`WELD_TOLERANCE`].

mod cell;
mod exact;
mod predicates;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use glam::DVec3;

pub use predicates::{keyed_vertex_cut_by, vertex_cut_by};
pub use cell::{compute_cell, site_plane, solve_key, Barycenter, CellFace, CellVertex, ConvexCell, ON_PLANE_EPS};

use crate::knn::{KnnScratch, NeighborIndex};
use crate::voroloss::GeneratorSet;
use crate::{par, Error, Result};

/// Vertices closer than this are merged into one diagram vertex.
pub const WELD_TOLERANCE: f64 = 1e-9;

/// Distance to the box boundary under which a vertex marks its cell as clipped.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Something a cell face can lie against: another generator, or one of the
/// six walls of the clip box (`0/1` = `-x/+x`, `2/3` = `-y/+y`, `4/5` = `-z/+z`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Generator(u32),
    Wall(u8),
}

/// Sorted quadruple of sites defining a vertex.
pub type VertexKey = [Site; 4];

/// Finite box standing in for unbounded space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipBox {
    pub min: DVec3,
    pub max: DVec3,
}

impl ClipBox {
    pub fn new(min: DVec3, max: DVec3) -> Result<ClipBox> {
        let e = max - min;
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.is_finite() {
            return Err(Error::InvalidClipBox);
        }
        Ok(ClipBox { min, max })
    }

    /// `[-0.5, 0.5]^3` grown by half its extent on every side: `[-1, 1]^3`.
    pub fn around_unit_box() -> ClipBox {
        ClipBox { min: DVec3::splat(-1.0), max: DVec3::splat(1.0) }
    }

    pub fn extent(&self) -> DVec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        self.extent().element_product()
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    /// Whether every point keeps a margin of `fraction` of the box extent to the walls.
    pub fn has_margin(&self, points: &[DVec3], fraction: f64) -> bool {
        let m = self.extent() * fraction;
        points.iter().all(|p| p.cmpge(self.min + m).all() && p.cmple(self.max - m).all())
    }

    /// Outward unit normal and offset of wall `w`.
    pub fn wall_plane(&self, w: u8) -> (DVec3, f64) {
        let axis = (w / 2) as usize;
        let mut n = DVec3::ZERO;
        if w % 2 == 0 {
            n[axis] = -1.0;
            (n, -self.min[axis])
        } else {
            n[axis] = 1.0;
            (n, self.max[axis])
        }
    }

    pub fn distance_to_boundary(&self, p: DVec3) -> f64 {
        (p - self.min).min(self.max - p).min_element()
    }
}

/// A face of a cell in diagram vertex ids, counter-clockwise seen from
/// outside the cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFaceRef {
    pub site: Site,
    pub vertices: Vec<u32>,
    pub normal: DVec3,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagramCell {
    pub faces: Vec<CellFaceRef>,
    pub barycenter: Barycenter,
    pub clipped: bool,
}

impl DiagramCell {
    pub fn volume(&self) -> f64 {
        self.barycenter.volume
    }

    pub fn contains(&self, p: DVec3, tol: f64) -> bool {
        self.faces.iter().all(|f| f.normal.dot(p) - f.offset <= tol)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = u32> + '_ {
        self.faces.iter().filter_map(|f| match f.site {
            Site::Generator(j) => Some(j),
            Site::Wall(_) => None,
        })
    }
}

/// Polygon shared by two cells; its normal points from `cells.0` toward `cells.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiFace {
    pub cells: (u32, u32),
    pub vertices: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DiagramStats {
    /// Keyed vertices merged into another by proximity.
    pub welded_vertices: usize,
    /// Face loops dropped after welding collapsed them below three vertices.
    pub collapsed_faces: usize,
    /// Generator pairs where only one of the two cells has the shared face.
    pub one_sided_faces: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiDiagram {
    pub bbox: ClipBox,
    pub vertices: Vec<DVec3>,
    pub vertex_keys: Vec<VertexKey>,
    pub cells: Vec<DiagramCell>,
    pub faces: Vec<VoronoiFace>,
    face_lookup: BTreeMap<(u32, u32), u32>,
    pub stats: DiagramStats,
}

impl VoronoiDiagram {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn clipped_flags(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.clipped).collect()
    }

    /// Shared face of generators `i` and `j`, in either order.
    pub fn face(&self, i: u32, j: u32) -> Option<&VoronoiFace> {
        self.face_lookup.get(&(i.min(j), i.max(j))).map(|&f| &self.faces[f as usize])
    }

    pub fn face_points<'a>(&'a self, loop_: &'a [u32]) -> impl Iterator<Item = DVec3> + Clone + 'a {
        loop_.iter().map(move |&v| self.vertices[v as usize])
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume()).sum()
    }
}

/// Builds every cell and assembles the shared vertex and face structure.
pub fn compute_diagram(generators: &GeneratorSet, bbox: &ClipBox) -> Result<VoronoiDiagram> {
    let positions = &generators.positions;
    if positions.is_empty() {
        return Err(Error::NoGenerators);
    }
    if let Some(i) = positions.iter().position(|p| !bbox.contains(*p)) {
        return Err(Error::GeneratorOutsideBox(i));
    }
    let index = NeighborIndex::new(positions);
    let cells: Vec<ConvexCell> = par::map_init(
        positions.len(),
        || (KnnScratch::new(), Vec::new()),
        |(heap, buf), i| cell::compute_cell_with(positions, i, bbox, &index, heap, buf),
    )
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(assemble(cells, *bbox))
}

fn assemble(cells: Vec<ConvexCell>, bbox: ClipBox) -> VoronoiDiagram {
    let mut stats = DiagramStats::default();

    // canonical ids by key
    let mut by_key: BTreeMap<VertexKey, u32> = BTreeMap::new();
    let mut positions: Vec<DVec3> = Vec::new();
    let mut keys: Vec<VertexKey> = Vec::new();
    let local_ids: Vec<Vec<u32>> = cells
        .iter()
        .map(|c| {
            c.vertices
                .iter()
                .map(|v| {
                    *by_key.entry(v.key).or_insert_with(|| {
                        positions.push(v.position);
                        keys.push(v.key);
                        (positions.len() - 1) as u32
                    })
                })
                .collect()
        })
        .collect();

    // merge distinct keys that name the same point
    let rep = weld(&positions, WELD_TOLERANCE);
    let mut compact = alloc::vec![u32::MAX; positions.len()];
    let mut vertices = Vec::new();
    let mut vertex_keys = Vec::new();
    for v in 0..positions.len() {
        let r = rep[v] as usize;
        if compact[r] == u32::MAX {
            compact[r] = vertices.len() as u32;
            vertices.push(positions[r]);
            vertex_keys.push(keys[r]);
        } else if r == v {
            unreachable!("representative precedes its members");
        }
        compact[v] = compact[r];
    }
    stats.welded_vertices = positions.len() - vertices.len();

    let mut diagram_cells = Vec::with_capacity(cells.len());
    for (ci, c) in cells.iter().enumerate() {
        let mut faces = Vec::with_capacity(c.faces.len());
        for f in &c.faces {
            let mut ids: Vec<u32> = f.vertices.iter().map(|&v| compact[local_ids[ci][v as usize] as usize]).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            if ids.len() < 3 {
                stats.collapsed_faces += 1;
                continue;
            }
            faces.push(CellFaceRef { site: f.site, vertices: ids, normal: f.normal, offset: f.offset });
        }
        let clipped = faces.iter().any(|f| matches!(f.site, Site::Wall(_)))
            || faces
                .iter()
                .flat_map(|f| f.vertices.iter())
                .any(|&v| bbox.distance_to_boundary(vertices[v as usize]) <= BOUNDARY_TOLERANCE);
        diagram_cells.push(DiagramCell { faces, barycenter: c.barycenter(), clipped });
    }

    let mut face_lookup: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut faces: Vec<VoronoiFace> = Vec::new();
    for (ci, c) in diagram_cells.iter().enumerate() {
        let i = ci as u32;
        for f in &c.faces {
            let Site::Generator(j) = f.site else { continue };
            let key = (i.min(j), i.max(j));
            if face_lookup.contains_key(&key) {
                continue;
            }
            let mut loop_ = f.vertices.clone();
            if i > j {
                loop_.reverse();
            }
            face_lookup.insert(key, faces.len() as u32);
            faces.push(VoronoiFace { cells: key, vertices: loop_ });
        }
    }
    for (&(a, b), _) in &face_lookup {
        let in_a = diagram_cells[a as usize].faces.iter().any(|f| f.site == Site::Generator(b));
        let in_b = diagram_cells[b as usize].faces.iter().any(|f| f.site == Site::Generator(a));
        if !(in_a && in_b) {
            stats.one_sided_faces += 1;
        }
    }

    VoronoiDiagram { bbox, vertices, vertex_keys, cells: diagram_cells, faces, face_lookup, stats }
}

/// Union-find over points within `tol`; returns for each point the lowest
/// index of its cluster.
fn weld(points: &[DVec3], tol: f64) -> Vec<u32> {
    let cell = tol * 4.0;
    let quant = |p: DVec3| {
        let q = (p / cell).floor();
        (q.x as i64, q.y as i64, q.z as i64)
    };
    let mut order: Vec<((i64, i64, i64), u32)> = points.iter().enumerate().map(|(i, p)| (quant(*p), i as u32)).collect();
    order.sort_unstable();

    let mut parent: Vec<u32> = (0..points.len() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let tol2 = tol * tol;
    for (i, p) in points.iter().enumerate() {
        let (qx, qy, qz) = quant(*p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = (qx + dx, qy + dy, qz + dz);
                    let start = order.partition_point(|e| e.0 < key);
                    for e in order[start..].iter().take_while(|e| e.0 == key) {
                        let j = e.1 as usize;
                        if j != i && points[j].distance_squared(*p) <= tol2 {
                            let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                            if a != b {
                                parent[a.max(b) as usize] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    (0..points.len() as u32).map(|i| find(&mut parent, i)).collect()
}
