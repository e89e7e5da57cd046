//! JSON and CSV documents written into a run directory.

use std::collections::BTreeMap;

use serde::Serialize;
use voromesh_core::extract::{RepairReport, WatertightReport};
use voromesh_core::metrics::MetricReport;
use voromesh_core::voronoi::VoronoiDiagram;

use crate::pipeline::Timings;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsJson {
    /// Symmetric Chamfer distance in units of `chamfer_unit`.
    pub chamfer: f64,
    pub chamfer_unit: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_threshold: f64,
    pub normal_consistency: f64,
    pub samples: usize,
    pub seed: u64,
}

impl From<&MetricReport> for MetricsJson {
    fn from(m: &MetricReport) -> Self {
        MetricsJson {
            chamfer: m.chamfer,
            chamfer_unit: voromesh_core::metrics::CHAMFER_UNIT,
            f1: m.f1,
            precision: m.precision,
            recall: m.recall,
            f1_threshold: m.f1_threshold,
            normal_consistency: m.normal_consistency,
            samples: m.n_samples,
            seed: m.seed,
        }
    }
}

pub const METRICS_CSV_HEADER: &str = "name,chamfer,f1,precision,recall,normal_consistency,watertight";

/// Header plus one row, for concatenation across runs.
pub fn metrics_csv(name: &str, m: &MetricReport, watertight: bool) -> String {
    format!(
        "{METRICS_CSV_HEADER}\n{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
        name.replace(',', "_"),
        m.chamfer,
        m.f1,
        m.precision,
        m.recall,
        m.normal_consistency,
        watertight
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WatertightJson {
    pub watertight: bool,
    pub edge_manifold: bool,
    pub closed: bool,
    pub consistently_oriented: bool,
    pub self_intersections: usize,
    pub vertices: usize,
    pub faces: usize,
    pub edges: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub misoriented_edges: usize,
    pub degenerate_faces: usize,
    pub degenerate_triangles: usize,
    pub intersecting_faces: Vec<(u32, u32)>,
    pub repair: RepairJson,
    pub diagram: DiagramJson,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepairJson {
    pub nonmanifold_edges: usize,
    pub duplicated_vertices: usize,
    pub midpoint_splits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagramJson {
    pub cells: usize,
    pub clipped_cells: usize,
    pub inside_cells: usize,
    pub faces: usize,
    pub welded_vertices: usize,
    pub collapsed_faces: usize,
    pub one_sided_faces: usize,
}

impl WatertightJson {
    pub fn new(w: &WatertightReport, r: &RepairReport, diagram: DiagramJson) -> Self {
        WatertightJson {
            watertight: w.is_watertight(),
            edge_manifold: w.edge_manifold,
            closed: w.closed,
            consistently_oriented: w.consistently_oriented,
            self_intersections: w.self_intersections,
            vertices: w.vertex_count,
            faces: w.face_count,
            edges: w.edge_count,
            boundary_edges: w.boundary_edges,
            nonmanifold_edges: w.nonmanifold_edges,
            misoriented_edges: w.misoriented_edges,
            degenerate_faces: w.degenerate_faces,
            degenerate_triangles: w.degenerate_triangles,
            intersecting_faces: w.intersecting_faces.clone(),
            repair: RepairJson {
                nonmanifold_edges: r.nonmanifold_edges,
                duplicated_vertices: r.duplicated_vertices,
                midpoint_splits: r.midpoint_splits,
            },
            diagram,
        }
    }
}

impl DiagramJson {
    pub fn new(d: &VoronoiDiagram, occupancy: &[bool]) -> Self {
        DiagramJson {
            cells: d.len(),
            clipped_cells: d.cells.iter().filter(|c| c.clipped).count(),
            inside_cells: occupancy.iter().filter(|&&o| o).count(),
            faces: d.faces.len(),
            welded_vertices: d.stats.welded_vertices,
            collapsed_faces: d.stats.collapsed_faces,
            one_sided_faces: d.stats.one_sided_faces,
        }
    }
}

/// Everything needed to rerun a command: its name, resolved settings,
/// versions and stage timings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub arguments: Vec<String>,
    pub settings: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    pub total_seconds: f64,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, settings: serde_json::Value) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            arguments: std::env::args().skip(1).collect(),
            settings,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            total_seconds: 0.0,
            notes: Vec::new(),
        }
    }

    pub fn set_timings(&mut self, t: &Timings) {
        // stages can repeat (e.g. two extractions); keep their sum
        for (stage, s) in &t.0 {
            *self.timings.entry(stage.clone()).or_default() += s;
        }
        self.total_seconds = t.total();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MetricReport {
        MetricReport {
            chamfer: 1.25,
            f1: 0.5,
            precision: 0.4,
            recall: 2.0 / 3.0,
            normal_consistency: 0.99,
            f1_threshold: 0.003,
            n_samples: 10,
            seed: 3,
        }
    }

    #[test]
    fn csv_has_one_row() {
        let csv = metrics_csv("a,b", &report(), true);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "a_b,1.250000,0.500000,0.400000,0.666667,0.990000,true");
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn metrics_json_fields() {
        let v = serde_json::to_value(MetricsJson::from(&report())).unwrap();
        assert_eq!(v["chamfer"], 1.25);
        assert_eq!(v["chamfer_unit"], 1e-5);
        assert_eq!(v["samples"], 10);
    }

    #[test]
    fn repeated_stages_are_summed() {
        let mut m = Manifest::new("x", serde_json::Value::Null);
        m.set_timings(&Timings(vec![("a".into(), 1.0), ("b".into(), 0.5), ("a".into(), 2.0)]));
        assert_eq!(m.timings["a"], 3.0);
        assert_eq!(m.total_seconds, 3.5);
    }
}
