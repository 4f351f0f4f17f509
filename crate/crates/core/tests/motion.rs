mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rigidflow::{
    apply_prior, build_prior, compose, compute_field, compute_field_with, extend_field, integrate, integrate_positions,
    scale_field, svd3, synthesize_scene, umeyama_align, Alignment, ExtendMode, Mat3, Motion, MotionSpec,
    RigidTransform, SpatPrior, TargetCloud, TrajectorySet, Vec3, VelocityField,
};

fn max_residual(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| (t.apply(s) - d).norm())
        .fold(0.0, f64::max)
}

fn motions() -> Vec<Motion> {
    vec![
        Motion::Translation {
            velocity: Vec3::new(0.02, -0.01, 0.005),
        },
        Motion::Rotation {
            axis: Vec3::new(0.3, 1.0, 0.2),
            deg_per_frame: 7.0,
            pivot: None,
        },
        Motion::Oscillation {
            amplitude: Vec3::new(0.1, 0.05, 0.0),
            frequency: 0.15,
        },
    ]
}

fn labeled_cloud(rng: &mut impl Rng, n: usize, components: usize) -> TargetCloud {
    let pts = random_cloud(rng, n, 0.8);
    let labels = (0..n).map(|i| i % components).collect();
    TargetCloud::from_positions(pts).unwrap().with_labels(labels).unwrap()
}

#[test]
fn umeyama_recovers_random_motions() {
    let mut r = rng(1);
    for _ in 0..200 {
        let n = r.random_range(3..=200);
        let truth = RigidTransform::new(random_rotation(&mut r), random_point(&mut r, 10.0));
        let src = random_cloud(&mut r, n, 5.0);
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let fit = umeyama_align(&src, &dst).unwrap();
        assert!(max_residual(&fit, &src, &dst) < 1e-9);
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn umeyama_reflection_fixture() {
    // Axis-aligned cross with spreads 3, 2, 1, mirrored in x. The best proper
    // rotation flips the least-spread axis too: diag(-1, 1, -1).
    let src = [
        Vec3::new(3.0, 0.0, 0.0),
        Vec3::new(-3.0, 0.0, 0.0),
        Vec3::new(0.0, 2.0, 0.0),
        Vec3::new(0.0, -2.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
    ];
    let dst: Vec<Vec3> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
    let fit = umeyama_align(&src, &dst).unwrap();
    let want = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, -1.0));
    assert!((fit.rotation - want).norm() < 1e-12, "{}", fit.rotation);
    assert!(fit.translation.norm() < 1e-12);
    assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
}

#[test]
fn umeyama_rejects_degenerate_sets() {
    let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    assert!(umeyama_align(&line, &line).is_err());
    assert!(umeyama_align(&line[..2], &line[..2]).is_err());
    assert!(umeyama_align(&line[..3], &line[..4]).is_err());
}

#[test]
fn self_transfer_reproduces_trajectories() {
    for motion in motions() {
        for components in [1, 2] {
            let mut spec = MotionSpec::new(motion.clone(), 10, 300);
            spec.components = components;
            let scene = synthesize_scene(&spec).unwrap();
            let prior = build_prior(&scene.trajectories).unwrap();
            let t = &scene.trajectories;
            let frames = apply_prior(&prior, &t.frame(0), t.labels(), Alignment::Anchored).unwrap();
            let mut worst = 0.0f64;
            for (f, frame) in frames.iter().enumerate() {
                for (k, p) in frame.iter().enumerate() {
                    worst = worst.max((p - t.position(k, f)).norm());
                }
            }
            assert!(worst < 1e-9, "{motion:?} x{components}: {worst}");
        }
    }
}

#[test]
fn noisy_rotation_angles_stay_close() {
    let mut spec = MotionSpec::new(
        Motion::Rotation {
            axis: Vec3::z(),
            deg_per_frame: 5.0,
            pivot: None,
        },
        10,
        300,
    );
    spec.seed = 3;
    let scene = synthesize_scene(&spec).unwrap();
    let mut r = rng(4);
    let noisy: Vec<Vec3> = scene
        .trajectories
        .positions()
        .iter()
        .map(|p| p + Vec3::from_fn(|_, _| gaussian(&mut r) * 1e-3))
        .collect();
    let trajs = TrajectorySet::new(noisy, scene.trajectories.labels().to_vec(), 10).unwrap();
    let prior = build_prior(&trajs).unwrap();
    for (fit, truth) in prior.steps(0).iter().zip(scene.prior.steps(0)) {
        let err = compose(&fit.inverse(), truth).rotation_angle().to_degrees();
        assert!(err < 0.1, "{err}");
    }
}

#[test]
fn field_integrates_back_to_the_prior() {
    let mut r = rng(5);
    for motion in motions() {
        let mut spec = MotionSpec::new(motion, 8, 60);
        spec.components = 2;
        let prior = synthesize_scene(&spec).unwrap().prior;
        let cloud = labeled_cloud(&mut r, 150, 2);
        let field = compute_field(&prior, &cloud).unwrap();
        assert_eq!((field.points(), field.steps()), (150, 7));
        let integrated = integrate(&cloud, &field).unwrap();
        let direct = apply_prior(&prior, &cloud.positions, &cloud.labels, Alignment::Anchored).unwrap();
        for (a, b) in integrated.iter().flatten().zip(direct.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn static_component_gets_zero_velocity() {
    let mut spec = MotionSpec::new(motions().remove(1), 6, 60);
    spec.components = 2;
    let prior = synthesize_scene(&spec).unwrap().prior;
    let cloud = labeled_cloud(&mut rng(6), 50, 2);
    let field = compute_field(&prior, &cloud).unwrap();
    for s in 0..field.steps() {
        for (i, v) in field.step(s).iter().enumerate() {
            if cloud.labels[i] == 0 {
                assert!(v.norm() < 1e-12);
            } else {
                assert!(v.norm() > 1e-6);
            }
        }
    }
}

#[test]
fn control_factors_scale_exactly() {
    let prior = synthesize_scene(&MotionSpec::new(motions().remove(1), 10, 100))
        .unwrap()
        .prior;
    let cloud = labeled_cloud(&mut rng(7), 120, 1);
    let field = compute_field(&prior, &cloud).unwrap();
    let origin = vec![Vec3::zeros(); 120];
    let base = integrate_positions(&origin, &field).unwrap();
    for s in [-1.0, 0.0, 0.5, 2.0] {
        let scaled = scale_field(&field, s).unwrap();
        for (a, b) in scaled.data().iter().zip(field.data()) {
            assert_eq!(*a, b * s);
        }
        let moved = integrate_positions(&origin, &scaled).unwrap();
        for (a, b) in moved.iter().flatten().zip(base.iter().flatten()) {
            assert_eq!(*a, b * s);
        }
    }
    assert!(scale_field(&field, f64::NAN).is_err());
}

#[test]
fn pingpong_returns_home() {
    let prior = synthesize_scene(&MotionSpec::new(motions().remove(2), 12, 100))
        .unwrap()
        .prior;
    let cloud = labeled_cloud(&mut rng(8), 90, 1);
    let field = compute_field(&prior, &cloud).unwrap();
    for repeats in 1..4 {
        let long = extend_field(&field, repeats, ExtendMode::PingPong).unwrap();
        assert_eq!(long.frames(), 2 * 11 * repeats + 1);
        let frames = integrate(&cloud, &long).unwrap();
        for (a, b) in frames.last().unwrap().iter().zip(&cloud.positions) {
            assert!((a - b).norm() < 1e-9);
        }
    }
    let looped = extend_field(&field, 3, ExtendMode::Loop).unwrap();
    assert_eq!(looped.frames(), 11 * 3 + 1);
    assert_eq!(looped.step(11), field.step(0));
    assert!(extend_field(&field, 0, ExtendMode::Loop).is_err());
}

#[test]
fn raw_alignment_uses_absolute_positions() {
    let prior = synthesize_scene(&MotionSpec::new(motions().remove(1), 5, 50))
        .unwrap()
        .prior;
    let cloud = labeled_cloud(&mut rng(9), 40, 1);
    let raw = compute_field_with(&prior, &cloud, Alignment::Raw).unwrap();
    // Raw: the velocity of a point is R·p + δ − p with p absolute.
    let step = prior.steps(0)[0];
    for (i, p) in cloud.positions.iter().enumerate() {
        assert!((raw.velocity(0, i) - (step.apply(p) - p)).norm() < 1e-14);
    }
}

#[test]
fn prior_validates_shapes() {
    let bad = RigidTransform::new(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0)), Vec3::zeros());
    assert!(SpatPrior::new(vec![vec![bad]], vec![Vec3::zeros()], 2).is_err());
    assert!(SpatPrior::new(vec![vec![RigidTransform::identity()]], vec![], 2).is_err());
    assert!(SpatPrior::new(vec![vec![RigidTransform::identity()]], vec![Vec3::zeros()], 3).is_err());
    assert!(SpatPrior::new(vec![vec![]], vec![Vec3::zeros()], 1).is_err());
}

#[test]
fn field_rejects_mismatched_shapes() {
    assert!(VelocityField::new(3, 2, vec![Vec3::zeros(); 5]).is_err());
    let f = VelocityField::zeros(3, 2);
    assert!(integrate_positions(&[Vec3::zeros(); 2], &f).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn umeyama_exact_and_proper(seed in any::<u64>(), n in 3usize..120, spread in 0.01f64..100.0) {
        let mut r = rng(seed);
        let truth = RigidTransform::new(random_rotation(&mut r), random_point(&mut r, spread));
        let src = random_cloud(&mut r, n, spread);
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let fit = umeyama_align(&src, &dst).unwrap();
        prop_assert!(max_residual(&fit, &src, &dst) < 1e-9 * spread.max(1.0));
        prop_assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = Mat3::from_fn(|_, _| r.random_range(-3.0..3.0));
        let s = svd3(&m);
        let back = s.u * Mat3::from_diagonal(&s.singular_values) * s.v.transpose();
        prop_assert!((back - m).norm() < 1e-12 * (1.0 + m.norm()));
        prop_assert!(s.singular_values[0] >= s.singular_values[1] && s.singular_values[1] >= s.singular_values[2]);
        prop_assert!((s.v.transpose() * s.v - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = RigidTransform::new(random_rotation(&mut r), random_point(&mut r, 5.0));
        let id = compose(&a, &a.inverse());
        prop_assert!((id.rotation - Mat3::identity()).norm() < 1e-12);
        prop_assert!(id.translation.norm() < 1e-12);
        let p = random_point(&mut r, 5.0);
        prop_assert!((a.inverse().apply(&a.apply(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn transfer_is_rigid_per_component(seed in any::<u64>(), which in 0usize..3, n in 4usize..60) {
        let mut spec = MotionSpec::new(motions().remove(which), 6, 40);
        spec.components = 2;
        spec.seed = seed;
        let prior = synthesize_scene(&spec).unwrap().prior;
        let cloud = labeled_cloud(&mut rng(seed), n, 2);
        let frames = integrate(&cloud, &compute_field(&prior, &cloud).unwrap()).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                if cloud.labels[i] != cloud.labels[j] {
                    continue;
                }
                let d0 = (frames[0][i] - frames[0][j]).norm();
                for f in &frames {
                    prop_assert!(((f[i] - f[j]).norm() - d0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn anchored_field_ignores_placement(seed in any::<u64>(), which in 0usize..3) {
        let mut r = rng(seed);
        let prior = synthesize_scene(&MotionSpec::new(motions().remove(which), 6, 40)).unwrap().prior;
        let cloud = labeled_cloud(&mut r, 30, 1);
        let shift = random_point(&mut r, 50.0);
        let moved = TargetCloud {
            positions: cloud.positions.iter().map(|p| p + shift).collect(),
            ..cloud.clone()
        };
        let a = compute_field(&prior, &cloud).unwrap();
        let b = compute_field(&prior, &moved).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).norm() < 1e-11);
        }
    }

    #[test]
    fn scaling_composes(seed in any::<u64>(), s in -4.0f64..4.0) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 10, 3, 1.0);
        let twice = scale_field(&scale_field(&f, s).unwrap(), 2.0).unwrap();
        let once = scale_field(&f, 2.0 * s).unwrap();
        prop_assert_eq!(twice, once);
    }
}
