//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rigidflow::cloud::{load_cloud, normalize_cloud, save_cloud, LabelSource, PlyEncoding};
use rigidflow::geometry::CameraModel;
use rigidflow::io::{self, PriorFile, TrajectoryFile, TrajectorySource};
use rigidflow::refine::StaticMode;
use rigidflow::trajectory::bbox_diagonal;
use rigidflow::{
    assign_labels, build_graph, build_prior, compute_field_with, cross_label_boundary, default_camera, extend_field,
    fit_residuals, flood_fill_boundary, integrate_positions, lift_tracks, mask_trajectories, mean_score,
    normalize_scene, propagate_static, refine, render, scale_field, score_sequence, synthesize_scene, CameraPath,
    ComponentAssignment, Error, Frame, Motion, MotionSpec, NeighborGraph, RigidTransform, TargetCloud, TrajectorySet,
    Vec3, VelocityField,
};

use crate::args::{MotionKind, SynthArgs};
use crate::config::{check_exists, existing, ProjectConfig};
use crate::error::{CliError, StageExt};

/// Wall-clock time per stage, reported on stderr.
pub struct Timings {
    start: Instant,
    stages: Vec<(&'static str, Duration)>,
}

impl Timings {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push((stage, t.elapsed()));
        out
    }

    pub fn report(&self) {
        for (stage, d) in &self.stages {
            eprintln!("timing {stage:<10} {:>9.3} s", d.as_secs_f64());
        }
        eprintln!("timing {:<10} {:>9.3} s", "total", self.start.elapsed().as_secs_f64());
    }
}

impl Default for Timings {
    fn default() -> Self {
        Self::new()
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::stage("output", format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::stage("output", format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Identity pose with a focal length equal to the larger image side.
pub fn identity_camera(width: usize, height: usize) -> rigidflow::Result<CameraModel> {
    let f = width.max(height) as f64;
    CameraModel::new(
        f,
        f,
        width as f64 / 2.0,
        height as f64 / 2.0,
        RigidTransform::identity(),
        width,
        height,
    )
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let v3 = |x: [f64; 3]| Vec3::new(x[0], x[1], x[2]);
    let motion = match a.motion {
        MotionKind::Translation => Motion::Translation {
            velocity: v3(a.velocity),
        },
        MotionKind::Rotation => Motion::Rotation {
            axis: v3(a.axis),
            deg_per_frame: a.deg_per_frame,
            pivot: a.pivot.map(v3),
        },
        MotionKind::Oscillation => Motion::Oscillation {
            amplitude: v3(a.amplitude),
            frequency: a.frequency,
        },
    };
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::usage(format!("noise must be >= 0, got {}", a.noise)));
    }
    let mut spec = MotionSpec::new(motion, a.frames, a.trajectories);
    spec.components = a.components;
    spec.seed = a.seed;
    let scene = synthesize_scene(&spec).map_err(CliError::usage)?;

    let mut trajs = scene.trajectories;
    if a.noise > 0.0 {
        let normal = Normal::new(0.0, a.noise).map_err(CliError::usage)?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let noisy = trajs
            .positions()
            .iter()
            .map(|p| {
                p + Vec3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                )
            })
            .collect();
        trajs = TrajectorySet::new(noisy, trajs.labels().to_vec(), trajs.frames()).stage("synth")?;
    }

    // The source cloud is the first frame exactly as stored in the f32 container.
    let first: Vec<Vec3> = trajs.frame(0).iter().map(|p| p.map(|c| f64::from(c as f32))).collect();
    let extent = spec.region_max - spec.region_min;
    let colors = first
        .iter()
        .map(|p| {
            let q = (p - spec.region_min).component_div(&extent);
            [q.x.clamp(0.0, 1.0), q.y.clamp(0.0, 1.0), q.z.clamp(0.0, 1.0)]
        })
        .collect();
    let radius = 0.01 * bbox_diagonal(&first);
    let n = first.len();
    let cloud = TargetCloud::new(first, colors, trajs.labels().to_vec(), vec![radius; n]).stage("synth")?;

    create_dir(&a.output)?;
    let file = TrajectoryFile {
        trajectories: trajs,
        scale: 1.0,
        source: TrajectorySource::Full,
    };
    io::save_trajectories(a.output.join("trajectories.mmtj"), &file).stage("synth")?;
    let prior = PriorFile {
        prior: scene.prior,
        scale: 1.0,
    };
    io::save_prior(a.output.join("prior_gt.mmsp"), &prior).stage("synth")?;
    save_cloud(a.output.join("source.ply"), &cloud, PlyEncoding::BinaryLittleEndian).stage("synth")?;
    println!(
        "wrote {} trajectories x {} frames to {}",
        file.trajectories.len(),
        file.trajectories.frames(),
        a.output.display()
    );
    Ok(())
}

fn cameras_or_identity(
    path: &Option<PathBuf>,
    frames: usize,
    width: usize,
    height: usize,
) -> Result<Vec<CameraModel>, CliError> {
    match path {
        Some(p) => {
            check_exists(p, "cameras")?;
            io::read_cameras(p, width, height).stage("load")
        }
        None => Ok(vec![identity_camera(width, height).stage("load")?; frames]),
    }
}

pub fn extract(c: &ProjectConfig) -> Result<(), CliError> {
    let p = &c.paths;
    let mut timings = Timings::new();

    let (trajs, prior_scale) = timings.time("load", || -> Result<_, CliError> {
        if let Some(path) = &p.trajectories {
            check_exists(path, "trajectories")?;
            let file = io::load_trajectories(path).stage("load")?;
            return Ok((file.trajectories, file.scale));
        }
        let tracks_path = p
            .tracks
            .as_ref()
            .ok_or_else(|| CliError::usage("extract needs 'trajectories' or 'tracks'"))?;
        check_exists(tracks_path, "tracks")?;
        let depth_dir = existing(&p.depth, "depth")?;
        let depths = io::load_depth_dir(depth_dir).stage("load")?;
        let (w, h) = depths.first().map(|d| (d.width, d.height)).unwrap_or((0, 0));
        let tracks = io::read_tracks_csv(tracks_path, w, h).stage("load")?;
        let cameras = cameras_or_identity(&p.cameras, tracks.frames(), w, h)?;
        let lifted = lift_tracks(&tracks, &depths, &cameras).stage("lift")?;
        let labels = match &p.track_labels {
            Some(path) => {
                check_exists(path, "track_labels")?;
                io::read_labels(path, lifted.len()).stage("load")?
            }
            None => lifted.labels().to_vec(),
        };
        let trajs = TrajectorySet::new(lifted.positions().to_vec(), labels, lifted.frames()).stage("lift")?;
        Ok((trajs, 1.0))
    })?;

    let (trajs, source) = match &p.masks {
        Some(dir) => timings.time("mask", || -> Result<_, CliError> {
            check_exists(dir, "masks")?;
            let masks = io::load_mask_dir(dir).stage("mask")?;
            let (w, h) = masks.first().map(|m| (m.width, m.height)).unwrap_or((0, 0));
            let cameras = cameras_or_identity(&p.cameras, trajs.frames(), w, h)?;
            let outcome = mask_trajectories(&trajs, &masks, &cameras, c.extract.window).stage("mask")?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.trajectories.is_empty() {
                return Err(CliError::stage("mask", Error::EmptyForeground));
            }
            println!("mask: kept {} of {} trajectories", outcome.kept.len(), trajs.len());
            Ok((outcome.trajectories, TrajectorySource::Masked))
        })?,
        None => (trajs, TrajectorySource::Full),
    };

    let (trajs, scale) = timings
        .time("normalize", || normalize_scene(&trajs))
        .stage("normalize")?;
    let prior = timings.time("fit", || build_prior(&trajs)).stage("fit")?;
    let residuals = fit_residuals(&prior, &trajs);
    for (comp, r) in residuals.iter().enumerate() {
        let worst = r.iter().copied().fold(0.0, f64::max);
        let mean = r.iter().sum::<f64>() / r.len().max(1) as f64;
        println!("component {comp}: fit residual mean {mean:.3e} max {worst:.3e}");
    }
    let file = PriorFile {
        prior,
        scale: scale * prior_scale,
    };
    timings.time("write", || -> Result<(), CliError> {
        ensure_parent(&p.prior)?;
        io::save_prior(&p.prior, &file).stage("output")
    })?;
    println!(
        "prior: {} component(s), {} frames, {:?} trajectories -> {}",
        file.prior.component_count(),
        file.prior.frames(),
        source,
        p.prior.display()
    );
    timings.report();
    Ok(())
}

/// Moves finished outputs into place; anything left behind on failure is removed.
struct Staging {
    dir: PathBuf,
    output: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(output: &Path) -> Result<Self, CliError> {
        create_dir(output)?;
        let dir = output.join(".staging");
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::stage("output", e))?;
        }
        create_dir(&dir)?;
        Ok(Self {
            dir,
            output: output.to_path_buf(),
            committed: false,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let mut names: Vec<_> = fs::read_dir(&self.dir)
            .map_err(|e| CliError::stage("output", e))?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::stage("output", e))?;
        names.sort();
        let mut moved = Vec::new();
        for name in names {
            let dest = self.output.join(&name);
            if dest.is_dir() {
                fs::remove_dir_all(&dest).map_err(|e| CliError::stage("output", e))?;
            } else if dest.exists() {
                fs::remove_file(&dest).map_err(|e| CliError::stage("output", e))?;
            }
            fs::rename(self.dir.join(&name), &dest).map_err(|e| CliError::stage("output", e))?;
            moved.push(dest);
        }
        self.committed = true;
        fs::remove_dir_all(&self.dir).map_err(|e| CliError::stage("output", e))?;
        Ok(moved)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// The render camera path: from file (at least `frames` lines, extra lines
/// ignored) or a fixed default camera framing `first`.
fn camera_path(c: &ProjectConfig, first: &[Vec3], frames: usize) -> Result<CameraPath, CliError> {
    let (w, h) = (c.render.width, c.render.height);
    match &c.paths.camera_path {
        Some(path) => {
            check_exists(path, "camera_path")?;
            let mut cams = io::read_cameras(path, w, h).map_err(CliError::usage)?;
            if cams.len() < frames {
                return Err(CliError::usage(format!(
                    "camera path has {} camera(s) but {frames} frames will be rendered",
                    cams.len()
                )));
            }
            cams.truncate(frames);
            CameraPath::new(cams).map_err(CliError::usage)
        }
        None => {
            let cam = default_camera(first, w, h).stage("render")?;
            CameraPath::fixed(cam, frames).stage("render")
        }
    }
}

#[cfg(feature = "png")]
fn write_png_dir(dir: &Path, frames: &[Frame]) -> Result<(), CliError> {
    create_dir(dir)?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(io::frame_file_name(i, "png"));
        image::save_buffer(
            &path,
            f.pixels(),
            f.width() as u32,
            f.height() as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| CliError::stage("output", format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(not(feature = "png"))]
fn write_png_dir(_: &Path, _: &[Frame]) -> Result<(), CliError> {
    Err(CliError::usage("png output needs a build with the 'png' feature"))
}

fn write_frames(dir: &Path, frames: &[Frame], png: bool) -> Result<(), CliError> {
    io::write_frame_dir(dir, frames).stage("output")?;
    if png {
        write_png_dir(&dir.with_extension("png"), frames)?;
    }
    Ok(())
}

fn load_target(c: &ProjectConfig) -> Result<TargetCloud, CliError> {
    let path = existing(&c.paths.target, "target")?;
    let loaded = load_cloud(path).stage("load")?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded.cloud)
}

pub fn transfer(c: &ProjectConfig) -> Result<(), CliError> {
    let p = &c.paths;
    if cfg!(not(feature = "png")) && c.render.png {
        return Err(CliError::usage("png output needs a build with the 'png' feature"));
    }
    check_exists(&p.prior, "prior")?;
    let target_path = existing(&p.target, "target")?.to_path_buf();
    for (key, path) in [
        ("labels", &p.labels),
        ("label_seeds", &p.label_seeds),
        ("boundary_seeds", &p.boundary_seeds),
        ("camera_path", &p.camera_path),
        ("reference", &p.reference),
    ] {
        if path.is_some() {
            existing(path, key)?;
        }
    }
    let mode = c.refine.mode()?;
    let extend = c.control.extend_mode()?;
    let alignment = c.control.alignment()?;
    let mut timings = Timings::new();

    let (prior, cloud) = timings.time("load", || -> Result<_, CliError> {
        let prior = io::load_prior(&p.prior).stage("load")?.prior;
        let loaded = load_cloud(&target_path).stage("load")?;
        for w in &loaded.warnings {
            eprintln!("warning: {}: {w}", target_path.display());
        }
        let mut cloud = loaded.cloud;
        if let Some(path) = &p.labels {
            let labels = io::read_labels(path, cloud.len()).stage("load")?;
            cloud = assign_labels(
                &cloud,
                LabelSource::Explicit(ComponentAssignment {
                    labels,
                    names: Vec::new(),
                }),
            )
            .stage("labels")?;
        }
        Ok((prior, cloud))
    })?;
    let frames = (prior.frames() - 1)
        * c.control.repeats
        * if extend == rigidflow::ExtendMode::PingPong {
            2
        } else {
            1
        }
        + 1;
    let first = cloud.positions.clone();
    let path = camera_path(c, &first, frames)?;
    let staging = Staging::new(&p.output)?;

    let normalized = timings
        .time("normalize", || normalize_cloud(&cloud))
        .stage("normalize")?;
    let needs_graph =
        c.refine.smoothing || p.label_seeds.is_some() || (c.refine.propagate && mode == StaticMode::Neighborhood);
    let graph: Option<NeighborGraph> = if needs_graph {
        Some(
            timings
                .time("graph", || build_graph(&normalized.cloud, c.refine.k))
                .stage("graph")?,
        )
    } else {
        None
    };
    let mut target = normalized.cloud.clone();
    if let Some(path) = &p.label_seeds {
        let seeds = io::read_label_seeds(path).stage("load")?;
        let graph = graph.as_ref().expect("graph is built when seeds are given");
        target = timings
            .time("labels", || {
                assign_labels(&target, LabelSource::Seeds { seeds: &seeds, graph })
            })
            .stage("labels")?;
    }
    if target.component_count() != prior.component_count() {
        return Err(CliError::stage(
            "labels",
            Error::LabelCountMismatch {
                expected: prior.component_count(),
                found: target.component_count(),
            },
        ));
    }

    let mut field = timings
        .time("field", || compute_field_with(&prior, &target, alignment))
        .stage("field")?;
    if c.refine.smoothing {
        let graph = graph.as_ref().expect("graph is built for smoothing");
        let boundary = match &p.boundary_seeds {
            Some(path) => {
                let seeds = io::read_indices(path).stage("load")?;
                flood_fill_boundary(graph, &target.labels, &seeds, c.refine.hops).stage("boundary")?
            }
            None => cross_label_boundary(graph, &target.labels).stage("boundary")?,
        };
        println!("boundary: {} point(s)", boundary.len());
        let (refined, trace) = timings
            .time("refine", || refine(&field, graph, &boundary, &c.refine.refinement()))
            .stage("refine")?;
        println!("refine: loss {:.6e} -> {:.6e}", trace.initial(), trace.last());
        write_text(&staging.path("loss.csv"), &io::format_loss_csv(&trace))?;
        field = refined;
    }
    if c.refine.propagate {
        let g = if mode == StaticMode::Neighborhood {
            graph.as_ref()
        } else {
            None
        };
        field = timings
            .time("propagate", || propagate_static(&field, g, c.refine.epsilon, mode))
            .stage("propagate")?;
    }
    drop(graph);

    let field = timings
        .time("control", || -> rigidflow::Result<VelocityField> {
            let scaled = scale_field(&field, c.control.speed)?;
            let extended = extend_field(&scaled, c.control.repeats, extend)?;
            Ok(extended.map(|v| normalized.denormalize_vector(v)))
        })
        .stage("control")?;
    let positions = timings
        .time("integrate", || integrate_positions(&first, &field))
        .stage("integrate")?;
    let rendered = timings
        .time("render", || render(&positions, &cloud, &path, c.render.background))
        .stage("render")?;

    timings.time("write", || -> Result<(), CliError> {
        io::save_field(staging.path("field.mmvf"), &field).stage("output")?;
        write_frames(&staging.path("frames"), &rendered, c.render.png)?;
        write_text(&staging.path("config.toml"), &c.to_toml())
    })?;
    if let Some(reference) = &p.reference {
        let scores = timings
            .time("metrics", || -> rigidflow::Result<_> {
                score_sequence(&rendered, &io::read_frame_dir(reference)?)
            })
            .stage("metrics")?;
        write_text(&staging.path("metrics.csv"), &io::format_metrics_csv(&scores))?;
        let m = mean_score(&scores);
        println!("metrics: mean psnr {:.4} dB, mean ssim {:.6}", m.psnr, m.ssim);
    }
    let moved = staging.commit()?;
    for m in moved {
        println!("wrote {}", m.display());
    }
    println!("frames: {frames}");
    timings.report();
    Ok(())
}

pub fn render_cmd(c: &ProjectConfig) -> Result<(), CliError> {
    if cfg!(not(feature = "png")) && c.render.png {
        return Err(CliError::usage("png output needs a build with the 'png' feature"));
    }
    let mut timings = Timings::new();
    let cloud = timings.time("load", || load_target(c))?;
    let positions: Vec<Vec<Vec3>> = match (&c.paths.field, &c.paths.trajectories) {
        (Some(_), _) => {
            let path = existing(&c.paths.field, "field")?;
            let field = io::load_field(path).stage("load")?;
            timings
                .time("integrate", || integrate_positions(&cloud.positions, &field))
                .stage("integrate")?
        }
        (None, Some(_)) => {
            let path = existing(&c.paths.trajectories, "trajectories")?;
            let trajs = io::load_trajectories(path).stage("load")?.trajectories;
            if trajs.len() != cloud.len() {
                return Err(CliError::stage(
                    "load",
                    Error::DimensionMismatch(format!("{} trajectories for {} points", trajs.len(), cloud.len())),
                ));
            }
            (0..trajs.frames()).map(|t| trajs.frame(t)).collect()
        }
        (None, None) => return Err(CliError::usage("render needs 'field' or 'trajectories'")),
    };
    let path = camera_path(c, &positions[0], positions.len())?;
    let frames = timings
        .time("render", || render(&positions, &cloud, &path, c.render.background))
        .stage("render")?;
    let dir = c.paths.output.join("frames");
    timings.time("write", || write_frames(&dir, &frames, c.render.png))?;
    println!("wrote {} frame(s) to {}", frames.len(), dir.display());
    timings.report();
    Ok(())
}

pub fn metrics(c: &ProjectConfig) -> Result<(), CliError> {
    let rendered = existing(&c.paths.rendered, "rendered")?;
    let reference = existing(&c.paths.reference, "reference")?;
    let a = io::read_frame_dir(rendered).stage("load")?;
    let b = io::read_frame_dir(reference).stage("load")?;
    let scores = score_sequence(&a, &b).stage("metrics")?;
    create_dir(&c.paths.output)?;
    let out = c.paths.output.join("metrics.csv");
    write_text(&out, &io::format_metrics_csv(&scores))?;
    let m = mean_score(&scores);
    println!(
        "metrics: mean psnr {:.4} dB, mean ssim {:.6} over {} frame(s)",
        m.psnr,
        m.ssim,
        scores.len()
    );
    println!("wrote {}", out.display());
    Ok(())
}

pub fn graph_dump(c: &ProjectConfig) -> Result<(), CliError> {
    let mut timings = Timings::new();
    let cloud = timings.time("load", || load_target(c))?;
    let normalized = normalize_cloud(&cloud).stage("normalize")?;
    let graph = timings
        .time("graph", || build_graph(&normalized.cloud, c.refine.k))
        .stage("graph")?;
    let mut text = String::with_capacity(graph.edge_count() * 6);
    for i in 0..graph.len() {
        let row: Vec<String> = graph.neighbors(i).iter().map(u32::to_string).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    create_dir(&c.paths.output)?;
    let out = c.paths.output.join("graph.txt");
    write_text(&out, &text)?;
    println!(
        "graph: {} points, {} directed edges, max degree {}",
        graph.len(),
        graph.edge_count(),
        graph.max_degree()
    );
    println!("wrote {}", out.display());
    timings.report();
    Ok(())
}
