//! Motion boundaries: points adjacent to a different rigid component.

use std::collections::VecDeque;

use super::graph::NeighborGraph;
use crate::error::{Error, Result};

pub const DEFAULT_HOPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundarySet {
    /// Boundary point indices, ascending.
    pub indices: Vec<usize>,
    /// Seeds the set was grown from; empty when derived from the whole graph.
    pub seeds: Vec<usize>,
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_labels(graph: &NeighborGraph, labels: &[usize]) -> Result<()> {
    if labels.len() != graph.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a graph of {} points",
            labels.len(),
            graph.len()
        )));
    }
    Ok(())
}

fn on_boundary(graph: &NeighborGraph, labels: &[usize], i: usize) -> bool {
    graph.neighbors(i).iter().any(|&j| labels[j as usize] != labels[i])
}

/// Breadth-first expansion from `seeds` for up to `hops` edges, keeping the
/// visited points that touch another component.
pub fn flood_fill_boundary(
    graph: &NeighborGraph,
    labels: &[usize],
    seeds: &[usize],
    hops: usize,
) -> Result<BoundarySet> {
    check_labels(graph, labels)?;
    if hops == 0 {
        return Err(Error::InvalidParameter("hops must be >= 1".into()));
    }
    let n = graph.len();
    if let Some(&bad) = seeds.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidSeed { index: bad, points: n });
    }

    let mut depth = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if depth[s] == usize::MAX {
            depth[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        if depth[i] == hops {
            continue;
        }
        for &j in graph.neighbors(i) {
            let j = j as usize;
            if depth[j] == usize::MAX {
                depth[j] = depth[i] + 1;
                queue.push_back(j);
            }
        }
    }

    let indices = (0..n)
        .filter(|&i| depth[i] != usize::MAX && on_boundary(graph, labels, i))
        .collect();
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    Ok(BoundarySet { indices, seeds })
}

/// Every point with a neighbor in another component.
pub fn cross_label_boundary(graph: &NeighborGraph, labels: &[usize]) -> Result<BoundarySet> {
    check_labels(graph, labels)?;
    Ok(BoundarySet {
        indices: (0..graph.len()).filter(|&i| on_boundary(graph, labels, i)).collect(),
        seeds: Vec::new(),
    })
}
