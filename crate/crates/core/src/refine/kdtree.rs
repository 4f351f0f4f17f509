//! Static 3D KD-tree for exact k-nearest-neighbor queries.
//!
//! Candidates are ordered by `(squared distance, index)`, so equidistant
//! points resolve to the lower index and results are fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
enum Kind {
    Leaf { start: u32, end: u32 },
    Split { dim: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    kind: Kind,
    lo: Vec3,
    hi: Vec3,
}

pub struct KdTree<'a> {
    points: &'a [Vec3],
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

/// A neighbor candidate; orders by squared distance, then index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dist2: f64,
    pub index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

/// Squared distance from `p` to the box `[lo, hi]`.
#[inline]
fn box_dist2(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let e = (lo[a] - p[a]).max(p[a] - hi[a]).max(0.0);
        d += e * e;
    }
    d
}

/// Squared distance between two boxes.
#[inline]
fn box_box_dist2(alo: &Vec3, ahi: &Vec3, blo: &Vec3, bhi: &Vec3) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let e = (blo[a] - ahi[a]).max(alo[a] - bhi[a]).max(0.0);
        d += e * e;
    }
    d
}

/// A leaf: its slice of the permutation and bounding box.
pub struct Leaf<'t> {
    pub members: &'t [u32],
    /// Offset of `members` within [`KdTree::order`].
    pub offset: usize,
    pub lo: Vec3,
    pub hi: Vec3,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut tree = Self {
            points,
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let points = self.points;
        let slice = &mut self.perm[start..end];
        let (mut lo, mut hi) = (points[slice[0] as usize], points[slice[0] as usize]);
        for &i in slice.iter() {
            lo = lo.inf(&points[i as usize]);
            hi = hi.sup(&points[i as usize]);
        }
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node {
                kind: Kind::Leaf {
                    start: start as u32,
                    end: end as u32,
                },
                lo,
                hi,
            });
            return id;
        }
        let dim = (hi - lo).imax();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][dim]
                .total_cmp(&points[b as usize][dim])
                .then(a.cmp(&b))
        });
        let value = points[slice[mid] as usize][dim];
        self.nodes.push(Node {
            kind: Kind::Leaf { start: 0, end: 0 },
            lo,
            hi,
        });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id as usize].kind = Kind::Split {
            dim: dim as u8,
            value,
            left,
            right,
        };
        id
    }

    /// Point indices in leaf order; every leaf owns a contiguous range.
    pub fn order(&self) -> &[u32] {
        &self.perm
    }

    pub fn leaves(&self) -> Vec<Leaf<'_>> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                Kind::Leaf { start, end } => Some(Leaf {
                    members: &self.perm[start as usize..end as usize],
                    offset: start as usize,
                    lo: n.lo,
                    hi: n.hi,
                }),
                Kind::Split { .. } => None,
            })
            .collect()
    }

    /// The `k` nearest points to `points[query]`, excluding itself, sorted ascending.
    pub fn nearest_excluding(&self, query: usize, k: usize) -> Vec<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, &self.points[query], query as u32, k, &mut heap);
        }
        heap.into_sorted_vec()
    }

    fn search(&self, node: u32, q: &Vec3, skip: u32, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node as usize].kind {
            Kind::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    if i == skip {
                        continue;
                    }
                    let c = Candidate {
                        dist2: dist2(q, &self.points[i as usize]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Kind::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, k, heap);
                // Equality still visits: the far side may hold a tie with a lower index.
                let bound = box_dist2(q, &self.nodes[far as usize].lo, &self.nodes[far as usize].hi);
                if heap.len() < k || bound <= heap.peek().unwrap().dist2 {
                    self.search(far, q, skip, k, heap);
                }
            }
        }
    }

    /// Appends every point whose squared distance to the box `[lo, hi]` is at most `d2`.
    pub fn within_box(&self, lo: &Vec3, hi: &Vec3, d2: f64, out: &mut Vec<u32>) {
        if !self.nodes.is_empty() {
            self.collect(0, lo, hi, d2, out);
        }
    }

    fn collect(&self, node: u32, lo: &Vec3, hi: &Vec3, d2: f64, out: &mut Vec<u32>) {
        let n = &self.nodes[node as usize];
        if box_box_dist2(lo, hi, &n.lo, &n.hi) > d2 {
            return;
        }
        match n.kind {
            Kind::Leaf { start, end } => {
                out.extend(
                    self.perm[start as usize..end as usize]
                        .iter()
                        .filter(|&&i| box_dist2(&self.points[i as usize], lo, hi) <= d2),
                );
            }
            Kind::Split { left, right, .. } => {
                self.collect(left, lo, hi, d2, out);
                self.collect(right, lo, hi, d2, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], q: usize, k: usize) -> Vec<Candidate> {
        let mut all: Vec<Candidate> = (0..points.len())
            .filter(|&j| j != q)
            .map(|j| Candidate {
                dist2: dist2(&points[q], &points[j]),
                index: j as u32,
            })
            .collect();
        all.sort();
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let tree = KdTree::new(&pts);
        for q in (0..300).step_by(7) {
            for k in [1, 5, 40, 299, 500] {
                assert_eq!(tree.nearest_excluding(q, k), brute(&pts, q, k));
            }
        }
    }

    #[test]
    fn ties_resolve_to_lower_index() {
        // Integer grid: many equidistant neighbors.
        let pts: Vec<Vec3> = (0..125)
            .map(|i| Vec3::new((i % 5) as f64, ((i / 5) % 5) as f64, (i / 25) as f64))
            .collect();
        let tree = KdTree::new(&pts);
        for q in 0..125 {
            for k in [1, 3, 6, 7, 19] {
                assert_eq!(tree.nearest_excluding(q, k), brute(&pts, q, k));
            }
        }
    }

    #[test]
    fn leaves_partition_the_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let tree = KdTree::new(&pts);
        let mut seen: Vec<u32> = tree.leaves().iter().flat_map(|l| l.members.to_vec()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..200).collect::<Vec<u32>>());
        for leaf in tree.leaves() {
            let mut got = Vec::new();
            tree.within_box(&leaf.lo, &leaf.hi, 0.01, &mut got);
            got.sort_unstable();
            let want: Vec<u32> = (0..200)
                .filter(|&i| box_dist2(&pts[i as usize], &leaf.lo, &leaf.hi) <= 0.01)
                .collect();
            assert_eq!(got, want);
        }
    }
}
