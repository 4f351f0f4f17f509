mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rigidflow::{
    default_camera, lift_tracks, mask_trajectories, psnr, render, score_sequence, ssim, CameraModel, CameraPath,
    DepthMap, Frame, Mask, RigidTransform, TargetCloud, Track2DSet, TrajectorySet, Vec3, PSNR_CAP,
};

fn camera(w: usize, h: usize) -> CameraModel {
    CameraModel::new(
        60.0,
        60.0,
        w as f64 / 2.0,
        h as f64 / 2.0,
        RigidTransform::identity(),
        w,
        h,
    )
    .unwrap()
}

/// Per pixel: the nearest covering disk, lowest index on equal depth.
fn render_oracle(points: &[Vec3], cloud: &TargetCloud, cam: &CameraModel, bg: [u8; 3]) -> Frame {
    let mut frame = Frame::filled(cam.width, cam.height, bg);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut best: Option<(f64, usize)> = None;
            for (i, p) in points.iter().enumerate() {
                if p.z <= 0.0 {
                    continue;
                }
                let u = cam.fx * p.x / p.z + cam.cx;
                let v = cam.fy * p.y / p.z + cam.cy;
                let r = cam.fx * cloud.radii[i] / p.z;
                let (dx, dy) = (x as f64 - u, y as f64 - v);
                if dx * dx + dy * dy <= r * r && best.is_none_or(|(z, _)| p.z < z) {
                    best = Some((p.z, i));
                }
            }
            if let Some((_, i)) = best {
                let c = cloud.colors[i].map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
                frame.set(x, y, c);
            }
        }
    }
    frame
}

fn noisy(frame: &Frame, r: &mut impl Rng, amount: u8) -> Frame {
    let pixels = frame
        .pixels()
        .iter()
        .map(|&p| p.saturating_add(r.random_range(0..=amount)))
        .collect();
    Frame::from_raw(frame.width(), frame.height(), pixels).unwrap()
}

#[test]
fn render_matches_per_pixel_oracle() {
    let mut r = rng(1);
    let cam = camera(48, 40);
    for _ in 0..10 {
        let n = r.random_range(1..40);
        let points: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    r.random_range(-0.5..0.5),
                    r.random_range(-0.5..0.5),
                    r.random_range(0.5..3.0),
                )
            })
            .collect();
        // Radii large enough that every splat covers whole pixels.
        let radii = points.iter().map(|p| r.random_range(1.5..6.0) * p.z / cam.fx).collect();
        let colors = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
        let cloud = TargetCloud::new(points.clone(), colors, vec![0; n], radii).unwrap();
        let path = CameraPath::fixed(cam, 1).unwrap();
        let frames = render(std::slice::from_ref(&points), &cloud, &path, [10, 20, 30]).unwrap();
        assert_eq!(frames[0], render_oracle(&points, &cloud, &cam, [10, 20, 30]));
    }
}

#[test]
fn render_is_deterministic_and_checks_shapes() {
    let mut r = rng(2);
    let points = random_cloud(&mut r, 500, 1.0);
    let cloud = TargetCloud::from_positions(points.clone()).unwrap();
    let cam = default_camera(&points, 64, 64).unwrap();
    let path = CameraPath::fixed(cam, 2).unwrap();
    let seq = vec![points.clone(), points.clone()];
    let a = render(&seq, &cloud, &path, [255; 3]).unwrap();
    assert_eq!(a, render(&seq, &cloud, &path, [255; 3]).unwrap());
    assert_eq!(a[0], a[1]);
    assert!(render(&seq[..1], &cloud, &path, [255; 3]).is_err());
    assert!(render(&[points[..10].to_vec(), points[..10].to_vec()], &cloud, &path, [255; 3]).is_err());
}

#[test]
fn points_behind_the_camera_are_skipped() {
    let cloud = TargetCloud::from_positions(vec![Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 0.0)]).unwrap();
    let path = CameraPath::fixed(camera(16, 16), 1).unwrap();
    let f = render(std::slice::from_ref(&cloud.positions), &cloud, &path, [1, 2, 3]).unwrap();
    assert_eq!(f[0], Frame::filled(16, 16, [1, 2, 3]));
}

#[test]
fn identical_frames_score_the_cap() {
    let f = noisy(&Frame::filled(32, 32, [100; 3]), &mut rng(3), 50);
    assert_eq!(psnr(&f, &f).unwrap(), PSNR_CAP);
    assert!((ssim(&f, &f).unwrap() - 1.0).abs() < 1e-12);
    assert!(psnr(&f, &Frame::filled(31, 32, [0; 3])).is_err());
    assert!(ssim(&Frame::filled(8, 8, [0; 3]), &Frame::filled(8, 8, [0; 3])).is_err());
}

#[test]
fn psnr_hand_value() {
    // Every channel off by 5: MSE 25, PSNR = 10·log10(255²/25).
    let a = Frame::filled(4, 4, [10, 10, 10]);
    let b = Frame::filled(4, 4, [15, 15, 15]);
    let want = 10.0 * (255.0f64 * 255.0 / 25.0).log10();
    assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-12);
}

#[test]
fn sequence_scores() {
    let a = vec![Frame::filled(16, 16, [0; 3]); 3];
    let scores = score_sequence(&a, &a).unwrap();
    assert_eq!(scores.len(), 3);
    assert!(score_sequence(&a, &a[..2]).is_err());
}

#[test]
fn lifted_tracks_reproject() {
    let (w, h, frames) = (40, 30, 4);
    let cam = camera(w, h);
    let mut r = rng(4);
    let depth: Vec<DepthMap> = (0..frames)
        .map(|t| DepthMap::filled(w, h, 1.0 + 0.25 * t as f64))
        .collect();
    let tracks = 12;
    let mut coords = Vec::new();
    let mut visible = Vec::new();
    for _ in 0..tracks {
        for t in 0..frames {
            coords.push([r.random_range(0.0..(w - 1) as f64), r.random_range(0.0..(h - 1) as f64)]);
            visible.push(t != 2);
        }
    }
    let set = Track2DSet::new(coords.clone(), visible, tracks, frames, w, h).unwrap();
    let lifted = lift_tracks(&set, &depth, &vec![cam; frames]).unwrap();
    for k in 0..tracks {
        for t in [0, 1, 3] {
            let p = cam.project(&lifted.position(k, t)).unwrap();
            let [u, v] = coords[k * frames + t];
            assert!((p.u - u).abs() < 1e-9 && (p.v - v).abs() < 1e-9);
            assert!((p.depth - depth[t].get(0, 0)).abs() < 1e-12);
        }
        // The hidden frame interpolates its neighbors.
        let mid = (lifted.position(k, 1) + lifted.position(k, 3)) / 2.0;
        assert!((lifted.position(k, 2) - mid).norm() < 1e-12);
    }
}

/// Projects, rounds and checks the mask bit, then looks for a window with a
/// strict foreground majority.
fn mask_oracle(trajs: &TrajectorySet, masks: &[Mask], cams: &[CameraModel], window: usize) -> Vec<usize> {
    let frames = trajs.frames();
    let span = window.min(frames);
    (0..trajs.len())
        .filter(|&k| {
            let inside: Vec<bool> = (0..frames)
                .map(|t| {
                    let p = cams[t].to_camera(&trajs.position(k, t));
                    if p.z <= 0.0 {
                        return false;
                    }
                    let x = (cams[t].fx * p.x / p.z + cams[t].cx).round();
                    let y = (cams[t].fy * p.y / p.z + cams[t].cy).round();
                    x >= 0.0
                        && y >= 0.0
                        && (x as usize) < masks[t].width
                        && (y as usize) < masks[t].height
                        && masks[t].get(x as usize, y as usize)
                })
                .collect();
            (0..=frames - span).any(|s| 2 * inside[s..s + span].iter().filter(|&&b| b).count() > span)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn psnr_is_symmetric_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let base = noisy(&Frame::filled(24, 24, [90, 120, 150]), &mut r, 60);
        let a = noisy(&base, &mut r, 8);
        let b = noisy(&a, &mut r, 40);
        let pa = psnr(&base, &a).unwrap();
        prop_assert_eq!(pa, psnr(&a, &base).unwrap());
        prop_assert!(psnr(&base, &b).unwrap() <= pa);
        let s = ssim(&base, &a).unwrap();
        prop_assert!((s - ssim(&a, &base).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&s));
    }

    #[test]
    fn masking_only_filters(seed in any::<u64>(), window in prop::sample::select(vec![1usize, 3, 5, 9])) {
        let mut r = rng(seed);
        let (w, h, frames) = (20, 16, 6);
        let cams = vec![camera(w, h); frames];
        let n = 30;
        let mut positions = Vec::new();
        for _ in 0..n {
            for _ in 0..frames {
                positions.push(Vec3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), r.random_range(-0.2..2.0)));
            }
        }
        let trajs = TrajectorySet::new(positions, vec![0; n], frames).unwrap();
        let masks: Vec<Mask> = (0..frames)
            .map(|_| Mask::new(w, h, (0..w * h).map(|_| r.random_bool(0.6)).collect()).unwrap())
            .collect();
        let out = mask_trajectories(&trajs, &masks, &cams, window).unwrap();
        prop_assert_eq!(&out.kept, &mask_oracle(&trajs, &masks, &cams, window));
        for (i, &k) in out.kept.iter().enumerate() {
            prop_assert_eq!(out.trajectories.trajectory(i), trajs.trajectory(k));
        }
    }
}
