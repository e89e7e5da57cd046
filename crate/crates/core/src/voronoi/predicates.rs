//! Exact side tests for vertices defined by four generators.
//!
//! Exact ties (five cospherical generators) are broken by giving every
//! generator an infinitesimal power weight that shrinks with its index, so
//! lower indices win. The outcome depends only on the five generators
//! involved, which keeps neighboring cells in agreement.

use glam::DVec3;
use robust::{insphere, orient3d, Coord3D};

use super::exact::{det3, Expansion, Row};
use super::{ClipBox, Site, VertexKey};

fn c(p: DVec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Whether generator `m` is strictly closer (in perturbed power distance)
/// than the four generators of `tet` to their common equidistant point.
///
/// `tet` holds generator indices in increasing order and must not be
/// coplanar; `m` is not one of them.
pub fn vertex_cut_by(tet: [u32; 4], m: u32, positions: &[DVec3]) -> bool {
    let t = tet.map(|i| positions[i as usize]);
    let pm = positions[m as usize];
    let o = sign(orient3d(c(t[0]), c(t[1]), c(t[2]), c(t[3])));
    debug_assert!(o != 0, "vertex of coplanar generators {tet:?}");
    let s = sign(insphere(c(t[0]), c(t[1]), c(t[2]), c(t[3]), c(pm)));
    if s != 0 {
        return s * o > 0;
    }
    // The perturbed power difference is sum_k lambda_k w_k - w_m, with
    // lambda the barycentric coordinates of m in the tetrahedron.
    for k in 0..4 {
        if m < tet[k] {
            return true;
        }
        let mut r = t;
        r[k] = pm;
        let l = sign(orient3d(c(r[0]), c(r[1]), c(r[2]), c(r[3]))) * o;
        if l != 0 {
            return l < 0;
        }
    }
    true
}

/// Plane `n . x = d` of a key entry, exactly, relative to generator `g0`.
fn exact_plane(site: Site, g0: DVec3, positions: &[DVec3], bbox: &ClipBox) -> (Row, Expansion) {
    match site {
        Site::Generator(j) => plane_between(g0, positions[j as usize]),
        Site::Wall(w) => {
            let (n, d) = bbox.wall_plane(w);
            (n.to_array().map(Expansion::from_f64), Expansion::from_f64(d))
        }
    }
}

/// `2 (q - g0) . x = |q|^2 - |g0|^2`.
fn plane_between(g0: DVec3, q: DVec3) -> (Row, Expansion) {
    let n = [0, 1, 2].map(|c| Expansion::diff(q[c], g0[c]).scale(2.0));
    let d = (0..3).fold(Expansion::default(), |acc, c| {
        acc.add(&Expansion::product(q[c], q[c])).sub(&Expansion::product(g0[c], g0[c]))
    });
    (n, d)
}

/// [`vertex_cut_by`] for any key, walls included, in exact arithmetic.
/// Returns `None` when the key's planes are dependent.
///
/// The vertex solves `N x = D` for the three planes of the key other than
/// its lowest generator `g0`; it is cut when `2 (m - g0) . x > |m|^2 - |g0|^2`.
pub fn keyed_vertex_cut_by(key: &VertexKey, m: u32, positions: &[DVec3], bbox: &ClipBox) -> Option<bool> {
    let Site::Generator(i0) = key[0] else { return None };
    let g0 = positions[i0 as usize];
    let planes = [1, 2, 3].map(|k| exact_plane(key[k], g0, positions, bbox));
    let n: [Row; 3] = [planes[0].0.clone(), planes[1].0.clone(), planes[2].0.clone()];
    let det = det3(&n);
    let det_sign = det.sign();
    if det_sign == 0 {
        return None;
    }
    let (nm, dm) = plane_between(g0, positions[m as usize]);
    // Cramer: x_c = det(N with column c replaced by D) / det N
    let mut value = dm.mul(&det).neg();
    for c in 0..3 {
        let mut r = n.clone();
        for (row, plane) in r.iter_mut().zip(&planes) {
            row[c] = plane.1.clone();
        }
        value = value.add(&nm[c].mul(&det3(&r)));
    }
    let s = value.sign() * det_sign;
    if s != 0 {
        return Some(s > 0);
    }
    // Tie: weights w decreasing with index perturb the plane offsets. The
    // perturbed value gains +w_m, -lambda_j w_j for generator rows j, and
    // (sum lambda_j - 1) w_g0, where lambda solves N^T lambda = n_m.
    let mut lambda_num: [Option<Expansion>; 3] = [None, None, None];
    for k in 0..3 {
        if let Site::Generator(_) = key[k + 1] {
            let mut r = n.clone();
            r[k] = nm.clone();
            lambda_num[k] = Some(det3(&r));
        }
    }
    let mut coefficients: alloc::vec::Vec<(u32, i8)> = alloc::vec![(m, 1)];
    let mut sum = det.neg();
    for k in 0..3 {
        if let (Site::Generator(j), Some(l)) = (key[k + 1], &lambda_num[k]) {
            coefficients.push((j, -l.sign() * det_sign));
            sum = sum.add(l);
        }
    }
    coefficients.push((i0, sum.sign() * det_sign));
    coefficients.sort_unstable();
    let decisive = coefficients.iter().find(|c| c.1 != 0).map_or(1, |c| c.1);
    Some(decisive > 0)
}
