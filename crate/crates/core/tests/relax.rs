mod common;

use common::*;
use proptest::prelude::*;
use rigidflow::{
    build_graph_from_points, cross_label_boundary, kinematic_loss, propagate_static, refine, topological_loss,
    BoundarySet, NeighborGraph, RefinementConfig, StaticMode, Vec3, VelocityField,
};

struct Case {
    points: Vec<Vec3>,
    graph: NeighborGraph,
    labels: Vec<usize>,
    boundary: BoundarySet,
    field: VelocityField,
}

fn case(seed: u64, n: usize, k: usize, steps: usize, noise: f64) -> Case {
    let mut r = rng(seed);
    let points = random_cloud(&mut r, n, 1.0);
    let graph = build_graph_from_points(&points, k).unwrap();
    let labels: Vec<usize> = points.iter().map(|p| usize::from(p.x > 0.0)).collect();
    let boundary = cross_label_boundary(&graph, &labels).unwrap();
    let field = corrupted_field(&mut r, &labels, steps, noise);
    Case {
        points,
        graph,
        labels,
        boundary,
        field,
    }
}

fn total_loss(field: &VelocityField, graph: &NeighborGraph, boundary: &BoundarySet, cfg: &RefinementConfig) -> f64 {
    (1..=field.steps())
        .map(|t| {
            cfg.lambda_kin * kinematic_loss(field, graph, t).unwrap()
                + cfg.lambda_topo * topological_loss(field, boundary, graph, t).unwrap()
        })
        .sum()
}

#[test]
fn trace_is_monotone_and_matches_losses() {
    let cfg = RefinementConfig::default();
    for seed in 0..10 {
        let c = case(seed, 150, 8, 6, 0.3);
        let (out, trace) = refine(&c.field, &c.graph, &c.boundary, &cfg).unwrap();
        let totals = trace.totals();
        assert_eq!(totals.len(), cfg.sweeps + 1);
        assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{totals:?}");
        let before = total_loss(&c.field, &c.graph, &c.boundary, &cfg);
        let after = total_loss(&out, &c.graph, &c.boundary, &cfg);
        assert!((trace.initial() - before).abs() <= 1e-9 * before);
        assert!((trace.last() - after).abs() <= 1e-9 * after.max(1e-12));
    }
}

#[test]
fn uniform_field_is_a_fixed_point() {
    let c = case(11, 80, 6, 4, 0.0);
    let field = VelocityField::new(80, 4, vec![Vec3::new(0.5, 0.25, -1.0); 320]).unwrap();
    let (out, trace) = refine(&field, &c.graph, &c.boundary, &RefinementConfig::default()).unwrap();
    for (a, b) in out.data().iter().zip(field.data()) {
        assert!((a - b).norm() < 1e-14);
    }
    assert!(trace.last() < 1e-24);
}

#[test]
fn zero_sweeps_is_identity() {
    let c = case(12, 40, 4, 3, 0.5);
    let cfg = RefinementConfig {
        sweeps: 0,
        ..Default::default()
    };
    let (out, trace) = refine(&c.field, &c.graph, &c.boundary, &cfg).unwrap();
    assert_eq!(out, c.field);
    assert_eq!(trace.sweeps.len(), 1);
}

#[test]
fn permutation_equivariance_is_exact() {
    let c = case(13, 220, 10, 5, 0.4);
    let n = c.points.len();
    let order: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let mut inv = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        inv[i] = p;
    }
    let points: Vec<Vec3> = order.iter().map(|&i| c.points[i]).collect();
    let labels: Vec<usize> = order.iter().map(|&i| c.labels[i]).collect();
    let graph = build_graph_from_points(&points, 10).unwrap();
    let boundary = cross_label_boundary(&graph, &labels).unwrap();
    let mut mapped: Vec<usize> = c.boundary.indices.iter().map(|&i| inv[i]).collect();
    mapped.sort_unstable();
    assert_eq!(boundary.indices, mapped);

    let cfg = RefinementConfig::default();
    let (a, _) = refine(&c.field, &c.graph, &c.boundary, &cfg).unwrap();
    let (b, _) = refine(&c.field.permuted(&order), &graph, &boundary, &cfg).unwrap();
    assert_eq!(b, a.permuted(&order));
}

#[test]
fn refine_checks_inputs() {
    let c = case(14, 30, 4, 2, 0.1);
    let bad = RefinementConfig {
        damping: 1.5,
        ..Default::default()
    };
    assert!(refine(&c.field, &c.graph, &c.boundary, &bad).is_err());
    let short = VelocityField::zeros(29, 2);
    assert!(refine(&short, &c.graph, &c.boundary, &RefinementConfig::default()).is_err());
    let outside = BoundarySet {
        indices: vec![30],
        seeds: vec![],
    };
    assert!(refine(&c.field, &c.graph, &outside, &RefinementConfig::default()).is_err());
}

#[test]
fn default_static_threshold() {
    assert_eq!(RefinementConfig::default().epsilon, 1e-5);
    assert_eq!(RefinementConfig::default().sweeps, 5);
    assert_eq!(RefinementConfig::default().damping, 0.5);
}

#[test]
fn global_mode_uses_mean_of_dynamic_points() {
    // Step 1: dynamic velocities (1,0,0), (0,2,0), (0,0,3), (2,2,2); mean (0.75, 1, 1.25).
    let eps = 1e-5;
    let step0 = vec![
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::zeros(),
        Vec3::new(0.0, 2.0, 0.0),
        Vec3::new(0.0, 0.0, 3.0),
        Vec3::new(9e-6, 0.0, 0.0),
        Vec3::new(2.0, 2.0, 2.0),
    ];
    // Step 2: only point 1 moves, exactly at the threshold.
    let step1 = vec![
        Vec3::zeros(),
        Vec3::new(0.0, eps, 0.0),
        Vec3::zeros(),
        Vec3::zeros(),
        Vec3::zeros(),
        Vec3::new(0.0, 0.0, 1e-6),
    ];
    let field = VelocityField::new(6, 2, [step0.clone(), step1].concat()).unwrap();
    let out = propagate_static(&field, None, eps, StaticMode::Global).unwrap();
    let mean = Vec3::new(0.75, 1.0, 1.25);
    let want0 = [step0[0], mean, step0[2], step0[3], mean, step0[5]];
    assert_eq!(out.step(0), want0);
    let moving = Vec3::new(0.0, eps, 0.0);
    assert!(out.step(1).iter().all(|v| *v == moving));
}

#[test]
fn neighborhood_mode_leaves_isolated_statics() {
    // Chain 0-1-2 with 0 moving; component 3-4 entirely static; 5 alone.
    let graph = NeighborGraph::from_edges(6, &[(0, 1), (1, 2), (3, 4)]).unwrap();
    let v = Vec3::new(0.0, 1.0, 0.0);
    let mut data = vec![Vec3::zeros(); 6];
    data[0] = v;
    data[4] = Vec3::new(1e-7, 0.0, 0.0);
    let field = VelocityField::new(6, 1, data.clone()).unwrap();
    let out = propagate_static(&field, Some(&graph), 1e-5, StaticMode::Neighborhood).unwrap();
    // One pass: only direct neighbors of dynamic points change.
    let mut want = data;
    want[1] = v;
    assert_eq!(out.step(0), want);
    assert!(propagate_static(&field, None, 1e-5, StaticMode::Neighborhood).is_err());
    assert!(propagate_static(&field, None, 0.0, StaticMode::Global).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn refinement_never_increases_loss(seed in any::<u64>(), n in 10usize..120, k in 2usize..10, steps in 1usize..6, noise in 0.0f64..1.0) {
        let c = case(seed, n, k, steps, noise);
        let (_, trace) = refine(&c.field, &c.graph, &c.boundary, &RefinementConfig::default()).unwrap();
        let totals = trace.totals();
        prop_assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{:?}", totals);
    }

    #[test]
    fn lambdas_of_zero_leave_field_alone(seed in any::<u64>(), n in 4usize..60) {
        let c = case(seed, n, 3, 3, 0.5);
        let cfg = RefinementConfig { lambda_kin: 0.0, lambda_topo: 0.0, ..Default::default() };
        let (out, _) = refine(&c.field, &c.graph, &c.boundary, &cfg).unwrap();
        prop_assert_eq!(out, c.field);
    }

    #[test]
    fn propagation_keeps_dynamic_points(seed in any::<u64>(), n in 2usize..80, global in any::<bool>()) {
        let c = case(seed, n, 4, 2, 0.0);
        let mut r = rng(seed ^ 0xabc);
        // Random half of the points made static.
        let mut data = c.field.data().to_vec();
        for v in data.iter_mut() {
            if rand::Rng::random_bool(&mut r, 0.5) {
                *v = Vec3::zeros();
            }
        }
        let field = VelocityField::new(n, 2, data).unwrap();
        let mode = if global { StaticMode::Global } else { StaticMode::Neighborhood };
        let out = propagate_static(&field, Some(&c.graph), 1e-5, mode).unwrap();
        for (a, b) in out.data().iter().zip(field.data()) {
            if b.norm() >= 1e-5 {
                prop_assert_eq!(a, b);
            }
        }
    }
}
