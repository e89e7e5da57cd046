//! Distance of surface samples to the Voronoi faces of a generator set,
//! evaluated through bisector planes only.
//!
//! For a sample `x` inside the cell of generator `i`, the distance to the
//! nearest Voronoi face equals the smallest distance from `x` to a bisector
//! plane between `q_i` and another generator. Candidates are restricted to
//! the `k` nearest generators of `x`.

use alloc::vec;
use alloc::vec::Vec;
use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::knn::{KnnScratch, Neighbor, NeighborIndex};
use crate::{par, Error, Result};

/// Default number of nearest generators examined per sample.
pub const DEFAULT_K: usize = 32;

/// Generator positions, their starting positions, and optional occupancy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeneratorSet {
    pub positions: Vec<DVec3>,
    pub initial_positions: Vec<DVec3>,
    pub occupancy: Option<Vec<bool>>,
}

impl GeneratorSet {
    pub fn new(positions: Vec<DVec3>) -> GeneratorSet {
        GeneratorSet { initial_positions: positions.clone(), positions, occupancy: None }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// First pair (lowest indices) closer than `tol`, if any.
    pub fn find_coincident(&self, tol: f64) -> Option<(usize, usize)> {
        let index = NeighborIndex::new(&self.positions);
        let mut found: Option<(usize, usize)> = None;
        for (i, &p) in self.positions.iter().enumerate() {
            for n in index.knn(p, 2.min(self.len())) {
                let j = n.index as usize;
                if j != i && n.dist2 <= tol * tol {
                    let pair = (i.min(j), i.max(j));
                    if found.map_or(true, |f| pair < f) {
                        found = Some(pair);
                    }
                }
            }
        }
        found
    }

    /// Moves generators that sit within `tol` of a lower-indexed one by a
    /// random offset of magnitude `amplitude` per axis. Returns the number moved.
    pub fn jitter_coincident(&mut self, tol: f64, amplitude: f64, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut moved = 0;
        for _ in 0..8 {
            let index = NeighborIndex::new(&self.positions);
            let mut round = 0;
            for i in 0..self.positions.len() {
                let p = self.positions[i];
                let clash = index
                    .knn(p, 8.min(self.len()))
                    .iter()
                    .any(|n| (n.index as usize) < i && n.dist2 <= tol * tol);
                if clash {
                    let d = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    self.positions[i] = p + d * amplitude;
                    round += 1;
                }
            }
            moved += round;
            if round == 0 {
                break;
            }
        }
        moved
    }

    /// Copy with independent uniform noise in `[-amplitude, amplitude]` per coordinate.
    /// Occupancy and initial positions are carried over unchanged.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> GeneratorSet {
        let mut out = self.clone();
        if amplitude == 0.0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut out.positions {
            *p += DVec3::new(
                rng.gen_range(-amplitude..=amplitude),
                rng.gen_range(-amplitude..=amplitude),
                rng.gen_range(-amplitude..=amplitude),
            );
        }
        out
    }
}

pub fn build_index(generators: &GeneratorSet) -> NeighborIndex {
    NeighborIndex::new(&generators.positions)
}

/// Distance from `x` to the bisector plane of `q_i` and `q_j`.
pub fn bisector_distance(x: DVec3, q_i: DVec3, q_j: DVec3) -> Result<f64> {
    let w = q_j - q_i;
    let len = w.length();
    if !(len > 0.0) {
        return Err(Error::CoincidentGenerators(0, 1));
    }
    Ok(((x - (q_i + q_j) * 0.5).dot(w) / len).abs())
}

/// Selection made for one sample: its cell and the generator across the
/// closest bisector, with the signed offset `(x - m) . u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleTerm {
    pub cell: u32,
    pub partner: u32,
    pub signed_distance: f64,
}

impl SampleTerm {
    #[inline]
    pub fn value(&self) -> f64 {
        self.signed_distance * self.signed_distance
    }
}

fn check_args(n_generators: usize, k: usize) -> Result<()> {
    if n_generators < 2 {
        return Err(Error::TooFewGenerators(n_generators));
    }
    if k < 2 || k > n_generators {
        return Err(Error::InvalidNeighborCount { k, n: n_generators });
    }
    Ok(())
}

/// Evaluates the closest bisector among the first `k` neighbors of `x`.
/// Bisector distance ties keep the lowest generator index.
fn sample_term<F>(
    x: DVec3,
    positions: &[DVec3],
    neighbors: &[Neighbor],
    distance: &F,
) -> Result<SampleTerm>
where
    F: Fn(DVec3, DVec3, DVec3) -> f64,
{
    let i = neighbors[0].index;
    let qi = positions[i as usize];
    let mut best: Option<(f64, u32)> = None;
    for n in &neighbors[1..] {
        let qj = positions[n.index as usize];
        if qj == qi {
            let (a, b) = (i.min(n.index) as usize, i.max(n.index) as usize);
            return Err(Error::CoincidentGenerators(a, b));
        }
        let d = distance(x, qi, qj);
        let better = match best {
            None => true,
            Some((bd, bj)) => d < bd || (d == bd && n.index < bj),
        };
        if better {
            best = Some((d, n.index));
        }
    }
    let (_, j) = best.expect("k >= 2");
    let qj = positions[j as usize];
    let w = qj - qi;
    let signed = (x - (qi + qj) * 0.5).dot(w) / w.length();
    Ok(SampleTerm { cell: i, partner: j, signed_distance: signed })
}

fn plane_distance(x: DVec3, qi: DVec3, qj: DVec3) -> f64 {
    let w = qj - qi;
    ((x - (qi + qj) * 0.5).dot(w) / w.length()).abs()
}

/// Per-sample selections and signed distances.
pub fn sample_terms(samples: &[DVec3], generators: &GeneratorSet, k: usize) -> Result<Vec<SampleTerm>> {
    sample_terms_with(samples, &generators.positions, k, plane_distance)
}

fn sample_terms_with<F>(samples: &[DVec3], positions: &[DVec3], k: usize, distance: F) -> Result<Vec<SampleTerm>>
where
    F: Fn(DVec3, DVec3, DVec3) -> f64 + Sync + Send,
{
    check_args(positions.len(), k)?;
    let index = NeighborIndex::new(positions);
    par::map_init(
        samples.len(),
        || (KnnScratch::new(), Vec::with_capacity(k)),
        |(heap, buf), s| {
            index.knn_into(samples[s], k, heap, buf);
            sample_term(samples[s], positions, buf, &distance)
        },
    )
    .into_iter()
    .collect()
}

/// Sum over samples of the squared distance to the closest bisector plane.
pub fn voroloss(samples: &[DVec3], generators: &GeneratorSet, k: usize) -> Result<f64> {
    Ok(sample_terms(samples, generators, k)?.iter().map(SampleTerm::value).sum())
}

/// [`voroloss`] with a caller-supplied bisector distance. Used by the
/// self-check's negative control; production callers use [`voroloss`].
pub fn voroloss_with<F>(samples: &[DVec3], generators: &GeneratorSet, k: usize, distance: F) -> Result<f64>
where
    F: Fn(DVec3, DVec3, DVec3) -> f64 + Sync + Send,
{
    let terms = sample_terms_with(samples, &generators.positions, k, &distance)?;
    let q = &generators.positions;
    Ok(samples
        .iter()
        .zip(&terms)
        .map(|(x, t)| {
            let d = distance(*x, q[t.cell as usize], q[t.partner as usize]);
            d * d
        })
        .sum())
}

/// Gradient of `signed_distance^2` with respect to `(q_i, q_j)`, holding the
/// discrete selection fixed.
#[inline]
pub fn term_gradient(x: DVec3, qi: DVec3, qj: DVec3) -> (f64, DVec3, DVec3) {
    let w = qj - qi;
    let len = w.length();
    let u = w / len;
    let r = x - (qi + qj) * 0.5;
    let s = r.dot(u);
    let tangential = (r - u * s) / len;
    let ds_dqi = -u * 0.5 - tangential;
    let ds_dqj = -u * 0.5 + tangential;
    (s * s, ds_dqi * (2.0 * s), ds_dqj * (2.0 * s))
}

/// Loss and its gradient with respect to every generator position.
///
/// Each sample contributes only to its own cell's generator and the
/// generator across the selected bisector.
pub fn voroloss_with_grad(samples: &[DVec3], generators: &GeneratorSet, k: usize) -> Result<(f64, Vec<DVec3>)> {
    let terms = sample_terms(samples, generators, k)?;
    let positions = &generators.positions;
    let mut grad = vec![DVec3::ZERO; positions.len()];
    let mut loss = 0.0;
    for (x, t) in samples.iter().zip(&terms) {
        let (v, gi, gj) = term_gradient(*x, positions[t.cell as usize], positions[t.partner as usize]);
        loss += v;
        grad[t.cell as usize] += gi;
        grad[t.partner as usize] += gj;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two() -> GeneratorSet {
        GeneratorSet::new(vec![DVec3::new(-1.0, 0.0, 0.0), DVec3::new(1.0, 0.0, 0.0)])
    }

    #[test]
    fn bisector_distance_axis_plane() {
        let d = bisector_distance(DVec3::new(0.25, 0.7, -0.3), DVec3::new(-1.0, 0.0, 0.0), DVec3::X).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert_eq!(bisector_distance(DVec3::new(0.0, 3.0, 1.0), DVec3::new(-1.0, 0.0, 0.0), DVec3::X).unwrap(), 0.0);
        assert!(bisector_distance(DVec3::ZERO, DVec3::ONE, DVec3::ONE).is_err());
    }

    #[test]
    fn bisector_distance_matches_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut r = || DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for _ in 0..200 {
            let (x, qi, qj) = (r(), r(), r());
            // orthogonal projection of x onto the plane {y : |y - qi| = |y - qj|}
            let n = (qj - qi).normalize();
            let m = (qi + qj) / 2.0;
            let foot = x - n * (x - m).dot(n);
            assert!(((foot - qi).length() - (foot - qj).length()).abs() < 1e-12);
            let expected = (x - foot).length();
            assert!((bisector_distance(x, qi, qj).unwrap() - expected).abs() < 1e-12);
            // squared-distance form, valid on the q_i side
            let (a, b) = if (x - qi).length() <= (x - qj).length() { (qi, qj) } else { (qj, qi) };
            let alt = ((x - b).length_squared() - (x - a).length_squared()) / (2.0 * (b - a).length());
            assert!((alt - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn two_generator_loss() {
        let l = voroloss(&[DVec3::new(0.3, 0.0, 0.0)], &two(), 2).unwrap();
        assert!((l - 0.09).abs() < 1e-15);
    }

    #[test]
    fn samples_on_faces_have_zero_loss_and_gradient() {
        let x = [DVec3::new(0.0, 0.4, 0.1), DVec3::new(0.0, -2.0, 5.0)];
        let (l, g) = voroloss_with_grad(&x, &two(), 2).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == DVec3::ZERO));
    }

    #[test]
    fn empty_samples() {
        let (l, g) = voroloss_with_grad(&[], &two(), 2).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![DVec3::ZERO; 2]);
    }

    #[test]
    fn argument_errors() {
        let one = GeneratorSet::new(vec![DVec3::ZERO]);
        assert_eq!(voroloss(&[DVec3::ZERO], &one, 2), Err(Error::TooFewGenerators(1)));
        assert_eq!(voroloss(&[DVec3::ZERO], &two(), 3), Err(Error::InvalidNeighborCount { k: 3, n: 2 }));
        assert_eq!(voroloss(&[DVec3::ZERO], &two(), 1), Err(Error::InvalidNeighborCount { k: 1, n: 2 }));
        let dup = GeneratorSet::new(vec![DVec3::ZERO, DVec3::ZERO, DVec3::X]);
        assert_eq!(voroloss(&[DVec3::new(0.1, 0.0, 0.0)], &dup, 3), Err(Error::CoincidentGenerators(0, 1)));
    }

    #[test]
    fn two_generator_gradient_matches_finite_differences() {
        let x = [DVec3::new(0.3, 0.0, 0.0)];
        let q = two();
        let (_, g) = voroloss_with_grad(&x, &q, 2).unwrap();
        let h = 1e-6;
        for gi in 0..2 {
            for axis in 0..3 {
                let eval = |delta: f64| {
                    let mut p = q.clone();
                    p.positions[gi][axis] += delta;
                    voroloss(&x, &p, 2).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = g[gi][axis];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-6), "{gi} {axis}: {fd} vs {an}");
            }
        }
        // shifting either generator along +x moves the plane toward x
        assert!(g[0].x < 0.0 && g[1].x < 0.0);
    }

    #[test]
    fn custom_distance_is_used() {
        let x = [DVec3::new(0.3, 0.0, 0.0)];
        let l = voroloss_with(&x, &two(), 2, |x, a, b| plane_distance(x, a, b) * 2.0).unwrap();
        assert!((l - 0.36).abs() < 1e-12);
    }

    #[test]
    fn perturbed_zero_is_identity() {
        let q = two();
        assert_eq!(q.perturbed(0.0, 3), q);
        let p = q.perturbed(0.01, 3);
        for (a, b) in p.positions.iter().zip(&q.positions) {
            assert!((*a - *b).abs().max_element() <= 0.01);
        }
    }

    #[test]
    fn jitter_separates_duplicates() {
        let mut q = GeneratorSet::new(vec![DVec3::ZERO, DVec3::ZERO, DVec3::X, DVec3::X]);
        assert_eq!(q.find_coincident(1e-12), Some((0, 1)));
        assert_eq!(q.jitter_coincident(1e-12, 1e-9, 1), 2);
        assert_eq!(q.find_coincident(1e-12), None);
    }

    proptest::proptest! {
        #[test]
        fn translation_and_scaling(seed in 0u64..1000, tx in -3.0f64..3.0, s in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r = || DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = GeneratorSet::new((0..12).map(|_| r()).collect());
            let x: Vec<DVec3> = (0..40).map(|_| r()).collect();
            let base = voroloss(&x, &q, 12).unwrap();
            let t = DVec3::new(tx, -0.5 * tx, 0.25);
            let qt = GeneratorSet::new(q.positions.iter().map(|p| *p + t).collect());
            let xt: Vec<DVec3> = x.iter().map(|p| *p + t).collect();
            let moved = voroloss(&xt, &qt, 12).unwrap();
            proptest::prop_assert!((moved - base).abs() <= 1e-9 * base.max(1e-12));
            let qs = GeneratorSet::new(q.positions.iter().map(|p| *p * s).collect());
            let xs: Vec<DVec3> = x.iter().map(|p| *p * s).collect();
            let scaled = voroloss(&xs, &qs, 12).unwrap();
            proptest::prop_assert!((scaled - s * s * base).abs() <= 1e-9 * (s * s * base).max(1e-12));
        }
    }
}
