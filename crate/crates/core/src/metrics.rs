//! Surface comparison metrics on point samples: Chamfer distance, F1 at a
//! distance threshold, and normal consistency.
//!
//! Both meshes are sampled with the same seed. Distances are from each
//! sample to the nearest sample of the other mesh.

use alloc::vec::Vec;

use crate::knn::NeighborIndex;
use crate::mesh::TriangleMesh;
use crate::sampling::{sample_surface, SurfacePointSet};
use crate::{par, Result};

pub const DEFAULT_METRIC_SAMPLES: usize = 100_000;
pub const DEFAULT_F1_THRESHOLD: f64 = 0.003;
/// Chamfer values are reported in these units.
pub const CHAMFER_UNIT: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    /// Symmetric squared-distance Chamfer, in units of [`CHAMFER_UNIT`].
    pub chamfer: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub normal_consistency: f64,
    pub f1_threshold: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MetricReport {
    /// Chamfer distance in squared normalized units.
    pub fn chamfer_raw(&self) -> f64 {
        self.chamfer * CHAMFER_UNIT
    }
}

/// For every point of `from`, the squared distance to and index of the nearest point of `to`.
fn nearest_all(from: &SurfacePointSet, to: &SurfacePointSet) -> Vec<(f64, u32)> {
    let index = NeighborIndex::new(&to.points);
    par::map(from.len(), |i| {
        let n = index.nearest(from.points[i]).expect("nonempty sample set");
        (n.dist2, n.index)
    })
}

struct Directed {
    mean_dist2: f64,
    within: f64,
    normal_dot: f64,
}

fn directed(from: &SurfacePointSet, to: &SurfacePointSet, delta: f64) -> Directed {
    let nn = nearest_all(from, to);
    let n = nn.len() as f64;
    let mut d = Directed { mean_dist2: 0.0, within: 0.0, normal_dot: 0.0 };
    for (i, &(d2, j)) in nn.iter().enumerate() {
        d.mean_dist2 += d2;
        if libm::sqrt(d2) <= delta {
            d.within += 1.0;
        }
        d.normal_dot += from.normals[i].dot(to.normals[j as usize]).abs();
    }
    d.mean_dist2 /= n;
    d.within /= n;
    d.normal_dot /= n;
    d
}

fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Metrics from precomputed sample sets.
pub fn evaluate_samples(a: &SurfacePointSet, b: &SurfacePointSet, delta: f64, seed: u64) -> MetricReport {
    let ab = directed(a, b, delta);
    let ba = directed(b, a, delta);
    MetricReport {
        chamfer: 0.5 * (ab.mean_dist2 + ba.mean_dist2) / CHAMFER_UNIT,
        f1: f1_score(ab.within, ba.within),
        precision: ab.within,
        recall: ba.within,
        normal_consistency: 0.5 * (ab.normal_dot + ba.normal_dot),
        f1_threshold: delta,
        n_samples: a.len(),
        seed,
    }
}

/// All metrics from one pair of `n`-point sample sets.
pub fn evaluate(a: &TriangleMesh, b: &TriangleMesh, n: usize, delta: f64, seed: u64) -> Result<MetricReport> {
    let sa = sample_surface(a, n, seed)?;
    let sb = sample_surface(b, n, seed)?;
    Ok(evaluate_samples(&sa, &sb, delta, seed))
}

/// Chamfer distance in squared units (not scaled by [`CHAMFER_UNIT`]).
pub fn chamfer(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    Ok(evaluate(a, b, n, DEFAULT_F1_THRESHOLD, seed)?.chamfer_raw())
}

/// `(f1, precision, recall)`; precision is measured from `a` to `b`.
pub fn f1(a: &TriangleMesh, b: &TriangleMesh, n: usize, delta: f64, seed: u64) -> Result<(f64, f64, f64)> {
    let r = evaluate(a, b, n, delta, seed)?;
    Ok((r.f1, r.precision, r.recall))
}

pub fn normal_consistency(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    Ok(evaluate(a, b, n, DEFAULT_F1_THRESHOLD, seed)?.normal_consistency)
}
