//! Seeded fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidflow::{
    build_graph, build_prior, compute_field, cross_label_boundary, synthesize_scene, BoundarySet, Motion, MotionSpec,
    NeighborGraph, TargetCloud, Vec3, VelocityField,
};

/// Uniform points in the cube `[-0.5, 0.5]^3`.
pub fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect()
}

/// Everything a refinement run needs.
pub struct Fixture {
    pub cloud: TargetCloud,
    pub field: VelocityField,
    pub graph: NeighborGraph,
    pub boundary: BoundarySet,
}

/// Two-component rotation scene transferred onto `n` random points split at
/// x = 0, with a k-NN graph and its cross-label boundary.
pub fn fixture(n: usize, frames: usize, k: usize) -> Fixture {
    let mut spec = MotionSpec::new(
        Motion::Rotation {
            axis: Vec3::new(0.2, 1.0, 0.1),
            deg_per_frame: 4.0,
            pivot: None,
        },
        frames,
        400,
    );
    spec.components = 2;
    let scene = synthesize_scene(&spec).expect("scene");
    let prior = build_prior(&scene.trajectories).expect("prior");
    let points = cloud(n, 7);
    let labels = points.iter().map(|p| usize::from(p.x > 0.0)).collect();
    let cloud = TargetCloud::from_positions(points)
        .and_then(|c| c.with_labels(labels))
        .expect("cloud");
    let field = compute_field(&prior, &cloud).expect("field");
    let graph = build_graph(&cloud, k).expect("graph");
    let boundary = cross_label_boundary(&graph, &cloud.labels).expect("boundary");
    Fixture {
        cloud,
        field,
        graph,
        boundary,
    }
}
