//! Exact k-nearest-neighbor search over a static point set (kd-tree).
//!
//! Results are ordered by `(squared distance, index)`, so equidistant points
//! come back in ascending index order and every query is deterministic.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use glam::DVec3;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: u32,
    pub dist2: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Reusable buffer for [`NeighborIndex::knn_into`].
pub type KnnScratch = BinaryHeap<Neighbor>;

#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Vec<DVec3>,
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(points: &[DVec3]) -> NeighborIndex {
        let mut index = NeighborIndex {
            points: points.to_vec(),
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVec3] {
        &self.points
    }

    fn build(&mut self, lo: usize, hi: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: lo as u32, end: hi as u32 });
            return id;
        }
        let (mut min, mut max) = (DVec3::INFINITY, DVec3::NEG_INFINITY);
        for &i in &self.perm[lo..hi] {
            min = min.min(self.points[i as usize]);
            max = max.max(self.points[i as usize]);
        }
        let ext = max - min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let value = self.points[self.perm[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id as usize] = Node::Split { axis: axis as u8, value, left, right };
        id
    }

    /// The `k` nearest points to `x`, sorted ascending.
    pub fn knn(&self, x: DVec3, k: usize) -> Vec<Neighbor> {
        let mut heap = KnnScratch::new();
        let mut out = Vec::with_capacity(k);
        self.knn_into(x, k, &mut heap, &mut out);
        out
    }

    /// Allocation-free variant of [`knn`](Self::knn); `out` is overwritten.
    pub fn knn_into(&self, x: DVec3, k: usize, heap: &mut KnnScratch, out: &mut Vec<Neighbor>) {
        out.clear();
        heap.clear();
        if k == 0 || self.points.is_empty() {
            return;
        }
        if k >= self.points.len() {
            out.extend(
                self.points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Neighbor { index: i as u32, dist2: p.distance_squared(x) }),
            );
            out.sort_unstable();
            return;
        }
        self.search(0, x, k, heap);
        out.extend(heap.drain());
        out.sort_unstable();
    }

    fn search(&self, node: u32, x: DVec3, k: usize, heap: &mut KnnScratch) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    let cand = Neighbor { index: i, dist2: self.points[i as usize].distance_squared(x) };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = x[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(far, x, k, heap);
                }
            }
        }
    }

    /// Single nearest point, ties broken by lowest index.
    pub fn nearest(&self, x: DVec3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Neighbor { index: u32::MAX, dist2: f64::INFINITY };
        self.nearest_in(0, x, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: u32, x: DVec3, best: &mut Neighbor) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    let cand = Neighbor { index: i, dist2: self.points[i as usize].distance_squared(x) };
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = x[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, x, best);
                if diff * diff <= best.dist2 {
                    self.nearest_in(far, x, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[DVec3], x: DVec3, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Neighbor { index: i as u32, dist2: p.distance_squared(x) })
            .collect();
        all.sort();
        all.truncate(k);
        all
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<DVec3> {
        (0..n)
            .map(|_| DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn single_point() {
        let idx = NeighborIndex::new(&[DVec3::new(0.3, 0.2, 0.1)]);
        let r = idx.knn(DVec3::new(5.0, -3.0, 2.0), 1);
        assert_eq!(r[0].index, 0);
        assert_eq!(idx.nearest(DVec3::ZERO).unwrap().index, 0);
    }

    #[test]
    fn cube_corner_query_returns_that_corner_first() {
        let corners: Vec<DVec3> = (0..8)
            .map(|i| DVec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let idx = NeighborIndex::new(&corners);
        for (i, &c) in corners.iter().enumerate() {
            let r = idx.knn(c, 4);
            assert_eq!(r[0].index, i as u32);
            assert_eq!(r[0].dist2, 0.0);
            // the three edge neighbors are equidistant and come back by index
            assert!(r[1].index < r[2].index && r[2].index < r[3].index);
        }
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = random_points(&mut rng, 1000);
        let idx = NeighborIndex::new(&pts);
        for _ in 0..100 {
            let x = DVec3::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
            for k in [1, 5, 32, 999, 1000, 2000] {
                assert_eq!(idx.knn(x, k), brute(&pts, x, k));
            }
            assert_eq!(idx.nearest(x).unwrap(), brute(&pts, x, 1)[0]);
        }
    }

    #[test]
    fn ties_broken_by_index_on_lattice() {
        let mut pts = vec![];
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    pts.push(DVec3::new(i as f64, j as f64, k as f64) * 0.1);
                }
            }
        }
        let idx = NeighborIndex::new(&pts);
        let x = DVec3::new(0.25, 0.25, 0.25);
        assert_eq!(idx.knn(x, 20), brute(&pts, x, 20));
        assert_eq!(idx.nearest(x).unwrap(), brute(&pts, x, 1)[0]);
    }
}
