//! Symmetric k-nearest-neighbor graph over first-frame positions.

use rayon::prelude::*;

use super::kdtree::{dist2, Candidate, KdTree, Leaf};
use crate::cloud::TargetCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Consecutive leaves processed by one task, sharing a radius guess.
const LEAF_RUN: usize = 64;

/// Neighbor lists in compressed-row form.
///
/// Rows built by [`build_graph`] are sorted by `(distance, index)`, so the
/// row of a point does not depend on how the cloud is indexed. The
/// symmetric closure can push a row past `k` entries when a point is among
/// the nearest neighbors of many others.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    k: usize,
    /// Spatially coherent point order, empty when unknown.
    layout: Vec<u32>,
}

impl PartialEq for NeighborGraph {
    fn eq(&self, other: &Self) -> bool {
        (&self.offsets, &self.neighbors, self.k) == (&other.offsets, &other.neighbors, other.k)
    }
}

impl Eq for NeighborGraph {}

impl NeighborGraph {
    /// Builds a graph from explicit lists; they must be symmetric, in range
    /// and free of self-loops and duplicates. Row order is kept.
    pub fn from_lists(lists: &[Vec<usize>], k: usize) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for (i, row) in lists.iter().enumerate() {
            let mut seen = row.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("duplicate neighbor in row {i}")));
            }
            for &j in row {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, limit: n });
                }
                if j == i {
                    return Err(Error::InvalidParameter(format!("self-loop at {i}")));
                }
                if !lists[j].contains(&i) {
                    return Err(Error::InvalidParameter(format!("edge {i}->{j} has no reverse")));
                }
                neighbors.push(j as u32);
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            k,
            layout: Vec::new(),
        })
    }

    /// Symmetric graph from an undirected edge list; rows ascend by index.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, limit: n });
                }
            }
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        for row in &mut lists {
            row.sort_unstable();
            row.dedup();
        }
        let k = lists.iter().map(Vec::len).max().unwrap_or(0);
        Self::from_lists(&lists, k)
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Requested neighbor count.
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.len()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Directed entry count, twice the number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).contains(&(j as u32))
    }

    /// Points in an order where consecutive entries tend to be spatially
    /// close, if the graph was built from positions.
    pub fn layout(&self) -> Option<&[u32]> {
        (!self.layout.is_empty()).then_some(self.layout.as_slice())
    }

    /// The same graph with point `p` renamed to the position of `p` in
    /// `order`. Row order is kept.
    pub fn relabeled(&self, order: &[u32]) -> Self {
        let n = self.len();
        let mut inv = vec![0u32; n];
        for (p, &i) in order.iter().enumerate() {
            inv[i as usize] = p as u32;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for &i in order {
            offsets.push(offsets.last().unwrap() + self.degree(i as usize));
        }
        let mut neighbors = vec![0u32; self.neighbors.len()];
        let mut rows: Vec<&mut [u32]> = Vec::with_capacity(n);
        let mut rest = neighbors.as_mut_slice();
        for p in 0..n {
            let (row, tail) = rest.split_at_mut(offsets[p + 1] - offsets[p]);
            rows.push(row);
            rest = tail;
        }
        rows.into_par_iter().zip(order.par_iter()).for_each(|(row, &i)| {
            for (slot, &j) in row.iter_mut().zip(self.neighbors(i as usize)) {
                *slot = inv[j as usize];
            }
        });
        Self {
            offsets,
            neighbors,
            k: self.k,
            layout: Vec::new(),
        }
    }

    /// Neighbor lists sorted by index.
    pub fn to_sorted_lists(&self) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|i| {
                let mut row: Vec<usize> = self.neighbors(i).iter().map(|&j| j as usize).collect();
                row.sort_unstable();
                row
            })
            .collect()
    }
}

pub fn build_graph(cloud: &TargetCloud, k: usize) -> Result<NeighborGraph> {
    build_graph_from_points(&cloud.positions, k)
}

/// Exact k-NN over `points` (ties to the lower index), closed under symmetry.
pub fn build_graph_from_points(points: &[Vec3], k: usize) -> Result<NeighborGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::EmptyCloud { required: 2, found: n });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("neighbor count k must be >= 1".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("{n} points exceed the index range")));
    }
    let kk = k.min(n - 1);

    if kk == n - 1 {
        // Every point sees all others; the closure adds nothing.
        let neighbors: Vec<u32> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut row: Vec<Candidate> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| Candidate {
                        dist2: dist2(&points[i], &points[j]),
                        index: j as u32,
                    })
                    .collect();
                row.sort_unstable();
                row.into_iter().map(|c| c.index)
            })
            .collect();
        let offsets = (0..=n).map(|i| i * kk).collect();
        return Ok(NeighborGraph {
            offsets,
            neighbors,
            k,
            layout: Vec::new(),
        });
    }

    let tree = KdTree::new(points);
    let mut pos = vec![0usize; n];
    for (p, &i) in tree.order().iter().enumerate() {
        pos[i as usize] = p;
    }
    // Nearest lists with their keys, stored in leaf order.
    let mut knn_by_leaf = vec![Candidate { dist2: 0.0, index: 0 }; n * kk];
    let leaves = tree.leaves();
    let mut work = Vec::new();
    let mut rest = knn_by_leaf.as_mut_slice();
    for run in leaves.chunks(LEAF_RUN) {
        let len: usize = run.iter().map(|l| l.members.len()).sum();
        let (rows, r) = rest.split_at_mut(len * kk);
        rest = r;
        work.push((run, rows));
    }
    work.into_par_iter().for_each(|(run, rows)| {
        let mut radius2 = 0.0;
        let mut rows = rows;
        for leaf in run {
            let (mine, r) = rows.split_at_mut(leaf.members.len() * kk);
            rows = r;
            // Neighboring leaves have similar k-th distances.
            radius2 = nearest_for_leaf(&tree, points, leaf, kk, mine, radius2 * 1.05);
        }
    });
    let kth: Vec<Candidate> = (0..n).map(|i| knn_by_leaf[pos[i] * kk + kk - 1]).collect();

    // Reverse edges j -> i for every i in knn(j) with j not in knn(i). The
    // key of the reverse edge is (d, j) and lies beyond the k-th key of i.
    let mut extra_offsets = vec![0usize; n + 1];
    let mut pending = Vec::new();
    for (p, &j) in tree.order().iter().enumerate() {
        for c in &knn_by_leaf[p * kk..(p + 1) * kk] {
            let i = c.index as usize;
            let key = Candidate {
                dist2: c.dist2,
                index: j,
            };
            if key > kth[i] {
                extra_offsets[i + 1] += 1;
                pending.push((i as u32, key));
            }
        }
    }
    drop(kth);
    for i in 0..n {
        extra_offsets[i + 1] += extra_offsets[i];
    }
    let mut fill = extra_offsets.clone();
    let mut extra = vec![Candidate { dist2: 0.0, index: 0 }; pending.len()];
    for (i, key) in pending {
        extra[fill[i as usize]] = key;
        fill[i as usize] += 1;
    }
    drop(fill);
    let knn = |i: usize| &knn_by_leaf[pos[i] * kk..(pos[i] + 1) * kk];

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for i in 0..n {
        offsets.push(offsets[i] + kk + extra_offsets[i + 1] - extra_offsets[i]);
    }
    let mut neighbors = vec![0u32; offsets[n]];
    let mut rows: Vec<&mut [u32]> = Vec::with_capacity(n);
    let mut rest = neighbors.as_mut_slice();
    for i in 0..n {
        let (row, tail) = rest.split_at_mut(offsets[i + 1] - offsets[i]);
        rows.push(row);
        rest = tail;
    }
    let mut extra_rows: Vec<&mut [Candidate]> = Vec::with_capacity(n);
    let mut rest = extra.as_mut_slice();
    for i in 0..n {
        let (row, tail) = rest.split_at_mut(extra_offsets[i + 1] - extra_offsets[i]);
        extra_rows.push(row);
        rest = tail;
    }
    // Every reverse key exceeds the k-th nearest key, so the row is the
    // nearest list followed by the sorted reverse edges.
    rows.into_par_iter()
        .zip(extra_rows)
        .enumerate()
        .for_each(|(i, (row, added))| {
            added.sort_unstable();
            for (slot, c) in row.iter_mut().zip(knn(i).iter().chain(added.iter())) {
                *slot = c.index;
            }
        });

    Ok(NeighborGraph {
        offsets,
        neighbors,
        k,
        layout: tree.order().to_vec(),
    })
}

/// Sort key equivalent to `Candidate` ordering for non-negative distances.
#[inline]
fn packed(dist2: f64, index: u32) -> u128 {
    (u128::from(dist2.to_bits()) << 32) | u128::from(index)
}

/// Exact nearest lists for every member of one leaf; returns the largest
/// k-th squared distance found.
///
/// Every point within `r` of a member lies within `r` of the leaf box, so
/// a member with at least `k` pool points inside `r` has its exact list.
/// Without a usable guess, `r` starts from the k-th distance of one member
/// plus the box diagonal, which always suffices.
fn nearest_for_leaf(
    tree: &KdTree<'_>,
    points: &[Vec3],
    leaf: &Leaf<'_>,
    kk: usize,
    rows: &mut [Candidate],
    guess: f64,
) -> f64 {
    let mut radius2 = guess;
    if radius2.is_nan() || radius2 <= 0.0 {
        let c = leaf.members[0];
        let dc = tree.nearest_excluding(c as usize, kk)[kk - 1].dist2.sqrt();
        let r = dc + dist2(&leaf.lo, &leaf.hi).sqrt();
        radius2 = (r * r).max(f64::MIN_POSITIVE);
    }
    let mut pool = Vec::new();
    let mut keys: Vec<u128> = Vec::new();
    'grow: loop {
        pool.clear();
        tree.within_box(&leaf.lo, &leaf.hi, radius2, &mut pool);
        let near: Vec<(Vec3, u32)> = pool.iter().map(|&j| (points[j as usize], j)).collect();
        let mut widest = 0.0f64;
        for (m, &q) in leaf.members.iter().enumerate() {
            let p = points[q as usize];
            keys.clear();
            keys.extend(near.iter().filter_map(|(x, j)| {
                let d = dist2(&p, x);
                (d <= radius2 && *j != q).then(|| packed(d, *j))
            }));
            if keys.len() < kk {
                radius2 *= 1.6;
                continue 'grow;
            }
            keys.select_nth_unstable(kk - 1);
            keys.truncate(kk);
            keys.sort_unstable();
            for (slot, &key) in rows[m * kk..(m + 1) * kk].iter_mut().zip(&keys) {
                *slot = Candidate {
                    dist2: f64::from_bits((key >> 32) as u64),
                    index: key as u32,
                };
            }
            widest = widest.max(rows[m * kk + kk - 1].dist2);
        }
        return widest;
    }
}
