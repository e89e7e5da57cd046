//! Occupancy tagging, surface extraction, repair and watertightness checks.

mod intersect;
mod repair;
mod watertight;

use alloc::vec::Vec;
use glam::DVec3;

pub use repair::{repair_nonmanifold, RepairReport};
pub use watertight::{check_watertight, WatertightReport};

use crate::mesh::{PolygonMesh, TriangleMesh};
use crate::sampling::point_occupancy;
use crate::voronoi::{Site, VoronoiDiagram};
use crate::{par, Error, Result};

/// Cells a face separates. `outside` is `None` for a clip-box wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FacePair {
    pub inside: u32,
    pub outside: Option<u32>,
}

/// Polygon surface separating inside cells from outside cells. Face loops
/// are counter-clockwise seen from the outside cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VoroMeshSurface {
    pub vertices: Vec<DVec3>,
    pub faces: Vec<Vec<u32>>,
    pub face_pair: Vec<FacePair>,
}

impl VoroMeshSurface {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn to_polygon_mesh(&self) -> PolygonMesh {
        PolygonMesh { vertices: self.vertices.clone(), faces: self.faces.clone() }
    }

    pub fn to_triangle_mesh(&self) -> TriangleMesh {
        self.to_polygon_mesh().to_triangle_mesh()
    }

    pub fn signed_volume(&self) -> f64 {
        self.to_polygon_mesh().signed_volume()
    }

    pub fn face_points<'a>(&'a self, face: usize) -> impl Iterator<Item = DVec3> + Clone + 'a {
        self.faces[face].iter().map(move |&v| self.vertices[v as usize])
    }
}

/// Clipped cells are outside; every other cell takes the occupancy of its barycenter.
pub fn assign_occupancy(diagram: &VoronoiDiagram, gt: &TriangleMesh) -> Vec<bool> {
    par::map(diagram.len(), |i| {
        let c = &diagram.cells[i];
        !c.clipped && point_occupancy(gt, c.barycenter.point)
    })
}

/// Collects the faces between cells of opposite occupancy, taken from the
/// inside cell so that each loop is oriented away from it. Walls of inside
/// cells are kept too, which only happens when a clipped cell is marked inside.
pub fn extract_voromesh(diagram: &VoronoiDiagram, occupancy: &[bool]) -> Result<VoroMeshSurface> {
    if occupancy.len() != diagram.len() {
        return Err(Error::LengthMismatch { expected: diagram.len(), found: occupancy.len() });
    }
    let mut remap = alloc::vec![u32::MAX; diagram.vertices.len()];
    let mut out = VoroMeshSurface::default();
    for (i, cell) in diagram.cells.iter().enumerate() {
        if !occupancy[i] {
            continue;
        }
        for f in &cell.faces {
            let outside = match f.site {
                Site::Generator(j) if occupancy[j as usize] => continue,
                Site::Generator(j) => Some(j),
                Site::Wall(_) => None,
            };
            let loop_ = f
                .vertices
                .iter()
                .map(|&v| {
                    if remap[v as usize] == u32::MAX {
                        remap[v as usize] = out.vertices.len() as u32;
                        out.vertices.push(diagram.vertices[v as usize]);
                    }
                    remap[v as usize]
                })
                .collect();
            out.faces.push(loop_);
            out.face_pair.push(FacePair { inside: i as u32, outside });
        }
    }
    Ok(out)
}
