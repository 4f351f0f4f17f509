//! Velocity-field refinement: neighbor graph, motion boundaries, smoothness
//! losses, Jacobi relaxation and static-region propagation.

mod boundary;
mod graph;
pub mod kdtree;
mod loss;
mod propagate;
mod relax;

pub use boundary::{cross_label_boundary, flood_fill_boundary, BoundarySet, DEFAULT_HOPS};
pub use graph::{build_graph, build_graph_from_points, NeighborGraph};
pub use loss::{kinematic_loss, topological_loss};
pub use propagate::{propagate_static, StaticMode};
pub use relax::{
    refine, RefineTrace, RefinementConfig, StepLoss, SweepLoss, DEFAULT_DAMPING, DEFAULT_EPSILON, DEFAULT_SWEEPS,
};

/// Neighbor count used when none is configured.
pub const DEFAULT_NEIGHBORS: usize = 2048;
