//! Randomized consistency checks that can be run on a deployed build:
//! loss against exact face distances, analytic against numeric gradients,
//! cell volume conservation, and watertightness of extracted surfaces.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::extract::{check_watertight, extract_voromesh, repair_nonmanifold};
use crate::mesh::polygon_area_vector;
use crate::voroloss::{sample_terms, voroloss, voroloss_with, voroloss_with_grad, GeneratorSet};
use crate::voronoi::{compute_diagram, ClipBox, Site};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_point(rng: &mut ChaCha8Rng, half: f64) -> DVec3 {
    DVec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
}

fn random_generators(rng: &mut ChaCha8Rng, n: usize) -> GeneratorSet {
    GeneratorSet::new((0..n).map(|_| random_point(rng, 0.5)).collect())
}

fn segment_distance(p: DVec3, a: DVec3, b: DVec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance from `p` to a planar convex polygon.
pub fn point_polygon_distance(p: DVec3, polygon: &[DVec3]) -> f64 {
    let n = polygon_area_vector(polygon.iter().copied()).normalize_or_zero();
    let h = (p - polygon[0]).dot(n);
    let foot = p - n * h;
    let inside = (0..polygon.len()).all(|k| {
        let (a, b) = (polygon[k], polygon[(k + 1) % polygon.len()]);
        (b - a).cross(foot - a).dot(n) >= 0.0
    });
    if inside {
        return h.abs();
    }
    (0..polygon.len())
        .map(|k| segment_distance(p, polygon[k], polygon[(k + 1) % polygon.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Checks the loss with all neighbors against squared distances to the
/// faces of the diagram, over random configurations. `distance` is the
/// bisector distance handed to the loss, so that a wrong formula can be
/// shown to fail.
pub fn theorem1_suite_with<F>(instances: usize, seed: u64, distance: F) -> Result<CheckOutcome>
where
    F: Fn(DVec3, DVec3, DVec3) -> f64 + Sync + Send + Copy,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // large enough that every face point nearest to a probe survives clipping
    let bbox = ClipBox::new(DVec3::splat(-5.0), DVec3::splat(5.0))?;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.gen_range(5..=50);
        let q = random_generators(&mut rng, n);
        let probes: Vec<DVec3> = (0..200).map(|_| random_point(&mut rng, 1.0)).collect();
        let diagram = compute_diagram(&q, &bbox)?;
        let faces: Vec<Vec<DVec3>> =
            diagram.faces.iter().map(|f| diagram.face_points(&f.vertices).collect()).collect();
        let exact: f64 = probes
            .iter()
            .map(|&x| {
                let d = faces.iter().map(|f| point_polygon_distance(x, f)).fold(f64::INFINITY, f64::min);
                d * d
            })
            .sum();
        let loss = voroloss_with(&probes, &q, n, distance)?;
        worst = worst.max((loss - exact).abs() / exact.max(f64::MIN_POSITIVE));
    }
    Ok(CheckOutcome {
        name: "theorem1",
        passed: worst <= 1e-9,
        detail: format!("{instances} instances, max relative error {worst:.3e}"),
    })
}

pub fn theorem1_suite(instances: usize, seed: u64) -> Result<CheckOutcome> {
    theorem1_suite_with(instances, seed, |x, qi, qj| {
        let w = qj - qi;
        ((x - (qi + qj) * 0.5).dot(w) / w.length()).abs()
    })
}

/// Central differences of the loss against the analytic gradient, per
/// coordinate. A coordinate fails when its relative error reaches 1e-5; a
/// failure is explained when some sample changes its cell or partner within
/// the difference stencil, where the loss has a kink.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let (mut total, mut failed, mut unexplained) = (0usize, 0usize, 0usize);
    let selection = |s: &[DVec3], q: &GeneratorSet| -> Result<Vec<(u32, u32)>> {
        Ok(sample_terms(s, q, q.len())?.iter().map(|t| (t.cell, t.partner)).collect())
    };
    for _ in 0..instances {
        let n = rng.gen_range(4..20);
        let q = random_generators(&mut rng, n);
        let samples: Vec<DVec3> = (0..50).map(|_| random_point(&mut rng, 0.5)).collect();
        let k = q.len();
        let (_, grad) = voroloss_with_grad(&samples, &q, k)?;
        let base = selection(&samples, &q)?;
        for g in 0..q.len() {
            for axis in 0..3 {
                let mut plus = q.clone();
                let mut minus = q.clone();
                plus.positions[g][axis] += h;
                minus.positions[g][axis] -= h;
                let lp = voroloss(&samples, &plus, k)?;
                let lm = voroloss(&samples, &minus, k)?;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grad[g][axis];
                let err = (numeric - analytic).abs() / analytic.abs().max(1e-6);
                total += 1;
                if err >= 1e-5 {
                    failed += 1;
                    if selection(&samples, &plus)? == base && selection(&samples, &minus)? == base {
                        unexplained += 1;
                    }
                }
            }
        }
    }
    let fraction = 1.0 - failed as f64 / total.max(1) as f64;
    Ok(CheckOutcome {
        name: "gradient",
        passed: fraction >= 0.99 && unexplained == 0,
        detail: format!(
            "{instances} instances, {:.3}% of {total} coordinates within 1e-5, {failed} exceptions ({unexplained} without a selection change)",
            100.0 * fraction
        ),
    })
}

/// Sum of cell volumes against the clip box volume.
pub fn volume_suite(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = ClipBox::around_unit_box();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.gen_range(2..=500);
        let q = random_generators(&mut rng, n);
        let d = compute_diagram(&q, &bbox)?;
        worst = worst.max((d.total_volume() - bbox.volume()).abs() / bbox.volume());
    }
    Ok(CheckOutcome {
        name: "volume",
        passed: worst <= 1e-6,
        detail: format!("{instances} instances, max relative error {worst:.3e}"),
    })
}

/// Random occupancies with clipped cells outside, extracted and repaired.
pub fn watertight_suite(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = ClipBox::around_unit_box();
    let mut failures = 0;
    let mut first_failure = String::new();
    for t in 0..instances {
        let n = rng.gen_range(10..=300);
        let q = random_generators(&mut rng, n);
        let d = compute_diagram(&q, &bbox)?;
        let p = rng.gen_range(0.2..0.8);
        let occ: Vec<bool> = d.cells.iter().map(|c| !c.clipped && rng.gen_bool(p)).collect();
        let (surface, _) = repair_nonmanifold(&extract_voromesh(&d, &occ)?);
        let report = check_watertight(&surface);
        if !report.is_watertight() {
            failures += 1;
            if first_failure.is_empty() {
                first_failure = format!("; first failure at instance {t}: {report:?}");
            }
        }
    }
    Ok(CheckOutcome {
        name: "watertight",
        passed: failures == 0,
        detail: format!("{} of {instances} instances watertight{first_failure}", instances - failures),
    })
}

/// Every check with the default instance counts.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(alloc::vec![
        theorem1_suite(100, seed)?,
        gradient_suite(20, seed)?,
        volume_suite(50, seed)?,
        watertight_suite(100, seed)?,
    ])
}

/// Faces of the generator pair `(i, j)` seen from both cells, as a quick
/// structural check of a diagram. Returns the number of pairs whose two
/// loops are not reversed copies of each other.
pub fn mismatched_faces(diagram: &crate::voronoi::VoronoiDiagram) -> usize {
    diagram
        .faces
        .iter()
        .filter(|f| {
            let (a, b) = f.cells;
            let fa = diagram.cells[a as usize].faces.iter().find(|x| x.site == Site::Generator(b));
            let fb = diagram.cells[b as usize].faces.iter().find(|x| x.site == Site::Generator(a));
            match (fa, fb) {
                (Some(fa), Some(fb)) => {
                    let mut rev = fb.vertices.clone();
                    rev.reverse();
                    match rev.iter().position(|&v| v == fa.vertices[0]) {
                        Some(s) => {
                            rev.rotate_left(s);
                            rev != fa.vertices
                        }
                        None => true,
                    }
                }
                _ => true,
            }
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_distance() {
        let square = [
            DVec3::new(0.0, 0.0, 0.0),
            DVec3::new(1.0, 0.0, 0.0),
            DVec3::new(1.0, 1.0, 0.0),
            DVec3::new(0.0, 1.0, 0.0),
        ];
        assert!((point_polygon_distance(DVec3::new(0.5, 0.5, 2.0), &square) - 2.0).abs() < 1e-15);
        assert!((point_polygon_distance(DVec3::new(2.0, 0.5, 0.0), &square) - 1.0).abs() < 1e-15);
        assert!((point_polygon_distance(DVec3::new(2.0, 2.0, 1.0), &square) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn suites_pass() {
        assert!(theorem1_suite(5, 1).unwrap().passed);
        assert!(gradient_suite(2, 1).unwrap().passed);
        assert!(volume_suite(3, 1).unwrap().passed);
        assert!(watertight_suite(5, 1).unwrap().passed);
    }

    #[test]
    fn wrong_distance_fails() {
        // distance to the midpoint instead of to the plane
        let r = theorem1_suite_with(3, 2, |x, qi, qj| x.distance((qi + qj) * 0.5)).unwrap();
        assert!(!r.passed, "{r:?}");
    }
}
