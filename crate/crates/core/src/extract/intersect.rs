//! Exact triangle-triangle intersection built on adaptive-precision
//! orientation predicates.

use glam::DVec3;
use robust::{orient2d, orient3d, Coord, Coord3D};

#[inline]
fn c3(p: DVec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

#[inline]
pub(crate) fn orient(a: DVec3, b: DVec3, c: DVec3, d: DVec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

/// Drops the coordinate along `axis`.
#[inline]
fn project(p: DVec3, axis: usize) -> Coord<f64> {
    match axis {
        0 => Coord { x: p.y, y: p.z },
        1 => Coord { x: p.z, y: p.x },
        _ => Coord { x: p.x, y: p.y },
    }
}

#[inline]
fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Projection axis under which a triangle keeps a nonzero area, if any.
fn nondegenerate_axis(t: &[DVec3; 3]) -> Option<usize> {
    let n = (t[1] - t[0]).cross(t[2] - t[0]).abs();
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| n[b].total_cmp(&n[a]));
    axes.into_iter().find(|&ax| orient2d(project(t[0], ax), project(t[1], ax), project(t[2], ax)) != 0.0)
}

pub(crate) fn is_degenerate(t: &[DVec3; 3]) -> bool {
    nondegenerate_axis(t).is_none()
}

fn on_segment_2d(p: Coord<f64>, a: Coord<f64>, b: Coord<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment-segment intersection in the plane.
fn segments_2d(p0: Coord<f64>, p1: Coord<f64>, q0: Coord<f64>, q1: Coord<f64>) -> bool {
    let d1 = sign(orient2d(q0, q1, p0));
    let d2 = sign(orient2d(q0, q1, p1));
    let d3 = sign(orient2d(p0, p1, q0));
    let d4 = sign(orient2d(p0, p1, q1));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && on_segment_2d(p0, q0, q1))
        || (d2 == 0 && on_segment_2d(p1, q0, q1))
        || (d3 == 0 && on_segment_2d(q0, p0, p1))
        || (d4 == 0 && on_segment_2d(q1, p0, p1))
}

fn point_in_triangle_2d(p: Coord<f64>, a: Coord<f64>, b: Coord<f64>, c: Coord<f64>) -> bool {
    let s = [sign(orient2d(a, b, p)), sign(orient2d(b, c, p)), sign(orient2d(c, a, p))];
    !(s.contains(&1) && s.contains(&-1))
}

/// Whether the closed segment `s0 s1` meets the closed, nondegenerate triangle `t`.
pub(crate) fn segment_triangle(s0: DVec3, s1: DVec3, t: &[DVec3; 3]) -> bool {
    let [a, b, c] = *t;
    let o0 = sign(orient(a, b, c, s0));
    let o1 = sign(orient(a, b, c, s1));
    if o0 * o1 > 0 {
        return false;
    }
    if o0 == 0 && o1 == 0 {
        let Some(ax) = nondegenerate_axis(t) else { return false };
        let (p0, p1) = (project(s0, ax), project(s1, ax));
        let (pa, pb, pc) = (project(a, ax), project(b, ax), project(c, ax));
        return point_in_triangle_2d(p0, pa, pb, pc)
            || point_in_triangle_2d(p1, pa, pb, pc)
            || segments_2d(p0, p1, pa, pb)
            || segments_2d(p0, p1, pb, pc)
            || segments_2d(p0, p1, pc, pa);
    }
    let s = [sign(orient(s0, s1, a, b)), sign(orient(s0, s1, b, c)), sign(orient(s0, s1, c, a))];
    !(s.contains(&1) && s.contains(&-1))
}

/// Whether two nondegenerate triangles intersect anywhere other than in
/// the vertices and edges they share. Shared vertices are recognized by
/// identical coordinates.
pub(crate) fn triangles_intersect(t1: &[DVec3; 3], t2: &[DVec3; 3]) -> bool {
    let mut shared: [(usize, usize); 3] = [(0, 0); 3];
    let mut n = 0;
    for i in 0..3 {
        for j in 0..3 {
            if t1[i] == t2[j] {
                shared[n] = (i, j);
                n += 1;
                break;
            }
        }
    }
    match n {
        0 => (0..3).any(|i| segment_triangle(t1[i], t1[(i + 1) % 3], t2))
            || (0..3).any(|i| segment_triangle(t2[i], t2[(i + 1) % 3], t1)),
        1 => {
            let (i, j) = shared[0];
            segment_triangle(t1[(i + 1) % 3], t1[(i + 2) % 3], t2)
                || segment_triangle(t2[(j + 1) % 3], t2[(j + 2) % 3], t1)
        }
        2 => {
            let p = t1[3 - shared[0].0 - shared[1].0];
            let q = t2[3 - shared[0].1 - shared[1].1];
            let (u, w) = (t1[shared[0].0], t1[shared[1].0]);
            if orient(u, w, p, q) != 0.0 {
                return false;
            }
            let Some(ax) = nondegenerate_axis(t1) else { return false };
            let (pu, pw) = (project(u, ax), project(w, ax));
            sign(orient2d(pu, pw, project(p, ax))) == sign(orient2d(pu, pw, project(q, ax)))
        }
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [DVec3; 3] {
        [DVec3::from(a), DVec3::from(b), DVec3::from(c)]
    }

    #[test]
    fn crossing_triangles() {
        let t1 = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let t2 = tri([0.2, 0.2, -1.0], [0.2, 0.2, 1.0], [0.3, 0.5, 0.0]);
        assert!(triangles_intersect(&t1, &t2));
        let t3 = tri([2.0, 2.0, -1.0], [2.0, 2.0, 1.0], [3.0, 3.0, 0.0]);
        assert!(!triangles_intersect(&t1, &t3));
    }

    #[test]
    fn touching_at_a_point_counts() {
        let t1 = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let t2 = tri([0.25, 0.25, 0.0], [0.25, 0.25, 1.0], [0.5, 0.5, 1.0]);
        assert!(triangles_intersect(&t1, &t2));
    }

    #[test]
    fn shared_edge_folded_is_clean() {
        let t1 = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let t2 = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        assert!(!triangles_intersect(&t1, &t2));
        let flat = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, -1.0, 0.0]);
        assert!(!triangles_intersect(&t1, &flat));
        let overlap = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.2, 0.0]);
        assert!(triangles_intersect(&t1, &overlap));
    }

    #[test]
    fn shared_vertex() {
        let t1 = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let apart = tri([0.0, 0.0, 0.0], [-1.0, 0.0, 0.5], [0.0, -1.0, 0.5]);
        assert!(!triangles_intersect(&t1, &apart));
        let through = tri([0.0, 0.0, 0.0], [0.5, 0.5, 1.0], [0.5, 0.5, -1.0]);
        assert!(triangles_intersect(&t1, &through));
        // coplanar, small wedge inside the big one
        let inner = tri([0.0, 0.0, 0.0], [0.1, 0.05, 0.0], [0.05, 0.1, 0.0]);
        assert!(triangles_intersect(&t1, &inner));
    }

    #[test]
    fn coplanar_containment() {
        let t1 = tri([0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 4.0, 0.0]);
        let t2 = tri([0.5, 0.5, 0.0], [1.0, 0.5, 0.0], [0.5, 1.0, 0.0]);
        assert!(triangles_intersect(&t1, &t2));
        assert!(triangles_intersect(&t2, &t1));
    }

    #[test]
    fn degenerate_detection() {
        assert!(is_degenerate(&tri([0.0; 3], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0])));
        assert!(!is_degenerate(&tri([0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])));
    }
}
