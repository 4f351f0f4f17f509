//! 3D point trajectories: lifting from 2D tracks and depth, foreground
//! masking, scale normalization, and synthetic scenes with known motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{centroid, CameraModel, RigidTransform, Vec3};
use crate::prior::SpatPrior;

/// Default temporal window for foreground masking.
pub const DEFAULT_MASK_WINDOW: usize = 3;

/// `K` trajectories over `T` frames, stored trajectory-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    positions: Vec<Vec3>,
    labels: Vec<usize>,
    frames: usize,
}

impl TrajectorySet {
    pub fn new(positions: Vec<Vec3>, labels: Vec<usize>, frames: usize) -> Result<Self> {
        if frames < 2 {
            return Err(Error::InvalidParameter(format!(
                "trajectories need at least 2 frames, got {frames}"
            )));
        }
        if positions.len() != labels.len() * frames {
            return Err(Error::DimensionMismatch(format!(
                "{} positions for {} trajectories x {} frames",
                positions.len(),
                labels.len(),
                frames
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "non-finite position in trajectory {} frame {}",
                i / frames,
                i % frames
            )));
        }
        Ok(Self {
            positions,
            labels,
            frames,
        })
    }

    /// Builds a set from per-trajectory position lists.
    pub fn from_trajectories(trajectories: Vec<Vec<Vec3>>, labels: Vec<usize>) -> Result<Self> {
        let frames = trajectories.first().map_or(0, Vec::len);
        if trajectories.iter().any(|t| t.len() != frames) {
            return Err(Error::DimensionMismatch("trajectories have unequal lengths".into()));
        }
        Self::new(trajectories.into_iter().flatten().collect(), labels, frames)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn trajectory(&self, k: usize) -> &[Vec3] {
        &self.positions[k * self.frames..(k + 1) * self.frames]
    }

    #[inline]
    pub fn position(&self, k: usize, t: usize) -> Vec3 {
        self.positions[k * self.frames + t]
    }

    pub fn frame(&self, t: usize) -> Vec<Vec3> {
        (0..self.len()).map(|k| self.position(k, t)).collect()
    }

    /// Number of components, `max(label) + 1`.
    pub fn component_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn component_members(&self, component: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.labels[k] == component).collect()
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        let mut positions = Vec::with_capacity(keep.len() * self.frames);
        for &k in keep {
            positions.extend_from_slice(self.trajectory(k));
        }
        Self {
            positions,
            labels: keep.iter().map(|&k| self.labels[k]).collect(),
            frames: self.frames,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p * factor).collect(),
            labels: self.labels.clone(),
            frames: self.frames,
        }
    }
}

/// Row-major image of `T` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} grid",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

pub type DepthMap = Grid<f64>;
pub type Mask = Grid<bool>;

impl DepthMap {
    /// Bilinear sample with pixel centers at integer coordinates; clamps at the border.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        let x = u.clamp(0.0, (self.width - 1) as f64);
        let y = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Per-frame 2D pixel tracks with visibility flags, stored track-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Track2DSet {
    coords: Vec<[f64; 2]>,
    visible: Vec<bool>,
    tracks: usize,
    frames: usize,
    pub width: usize,
    pub height: usize,
}

impl Track2DSet {
    pub fn new(
        coords: Vec<[f64; 2]>,
        visible: Vec<bool>,
        tracks: usize,
        frames: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if coords.len() != tracks * frames || visible.len() != tracks * frames {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for {tracks} tracks x {frames} frames",
                tracks * frames
            )));
        }
        for (i, (c, &vis)) in coords.iter().zip(&visible).enumerate() {
            let inside = c[0] >= -0.5 && c[0] <= width as f64 - 0.5 && c[1] >= -0.5 && c[1] <= height as f64 - 0.5;
            if vis && !inside {
                return Err(Error::InvalidParameter(format!(
                    "visible sample of track {} at frame {} lies outside the {width}x{height} frame",
                    i / frames,
                    i % frames
                )));
            }
        }
        Ok(Self {
            coords,
            visible,
            tracks,
            frames,
            width,
            height,
        })
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn sample(&self, k: usize, t: usize) -> ([f64; 2], bool) {
        let i = k * self.frames + t;
        (self.coords[i], self.visible[i])
    }
}

/// Lifts 2D tracks into world-space trajectories using per-frame depth and cameras.
///
/// Visible samples are unprojected at the bilinearly sampled depth. Gaps are
/// filled by linear interpolation in 3D; leading and trailing gaps are
/// clamped to the nearest visible sample. All tracks get label 0.
pub fn lift_tracks(tracks: &Track2DSet, depths: &[DepthMap], cameras: &[CameraModel]) -> Result<TrajectorySet> {
    let frames = tracks.frames();
    if depths.len() != frames || cameras.len() != frames {
        return Err(Error::DimensionMismatch(format!(
            "{frames} track frames, {} depth maps, {} cameras",
            depths.len(),
            cameras.len()
        )));
    }
    for (t, (d, c)) in depths.iter().zip(cameras).enumerate() {
        if (d.width, d.height) != (tracks.width, tracks.height) || (c.width, c.height) != (tracks.width, tracks.height)
        {
            return Err(Error::ResolutionMismatch(format!(
                "frame {t}: tracks {}x{}, depth {}x{}, camera {}x{}",
                tracks.width, tracks.height, d.width, d.height, c.width, c.height
            )));
        }
    }

    let lifted: Vec<Vec<Vec3>> = (0..tracks.tracks())
        .into_par_iter()
        .map(|k| {
            let mut known: Vec<(usize, Vec3)> = Vec::new();
            for t in 0..frames {
                let ([u, v], vis) = tracks.sample(k, t);
                if !vis {
                    continue;
                }
                let depth = depths[t].sample_bilinear(u, v);
                if !(depth.is_finite() && depth > 0.0) {
                    return Err(Error::InvalidDepth {
                        track: k,
                        frame: t,
                        depth,
                    });
                }
                known.push((t, cameras[t].unproject(u, v, depth)?));
            }
            fill_gaps(&known, frames).ok_or(Error::NoVisibleSample { track: k })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let labels = vec![0; lifted.len()];
    if lifted.is_empty() {
        return TrajectorySet::new(Vec::new(), labels, frames);
    }
    TrajectorySet::from_trajectories(lifted, labels)
}

fn fill_gaps(known: &[(usize, Vec3)], frames: usize) -> Option<Vec<Vec3>> {
    let (first, last) = (known.first()?, known.last()?);
    let mut out = Vec::with_capacity(frames);
    let mut next = 0;
    for t in 0..frames {
        while next < known.len() && known[next].0 < t {
            next += 1;
        }
        let p = if t <= first.0 {
            first.1
        } else if t >= last.0 {
            last.1
        } else if known[next].0 == t {
            known[next].1
        } else {
            let (t0, p0) = known[next - 1];
            let (t1, p1) = known[next];
            let s = (t - t0) as f64 / (t1 - t0) as f64;
            p0 + (p1 - p0) * s
        };
        out.push(p);
    }
    Some(out)
}

#[derive(Debug, Clone)]
pub struct MaskOutcome {
    pub trajectories: TrajectorySet,
    /// Indices into the input set of the kept trajectories, ascending.
    pub kept: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Whether trajectory `k` projects onto foreground in frame `t`.
fn in_foreground(trajs: &TrajectorySet, masks: &[Mask], cameras: &[CameraModel], k: usize, t: usize) -> bool {
    let Ok(p) = cameras[t].project(&trajs.position(k, t)) else {
        return false;
    };
    let (x, y) = (p.u.round(), p.v.round());
    let mask = &masks[t];
    if x < 0.0 || y < 0.0 || x >= mask.width as f64 || y >= mask.height as f64 {
        return false;
    }
    mask.get(x as usize, y as usize)
}

/// Keeps every trajectory that lies inside the foreground for a strict
/// majority of the frames of at least one length-`window` temporal window.
///
/// Trajectories are kept whole. With `window = 1` this is the plain union of
/// the per-frame masked sets. Sequences shorter than the window are treated
/// as a single window.
pub fn mask_trajectories(
    trajs: &TrajectorySet,
    masks: &[Mask],
    cameras: &[CameraModel],
    window: usize,
) -> Result<MaskOutcome> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "mask window must be odd and >= 1, got {window}"
        )));
    }
    let frames = trajs.frames();
    if masks.len() != frames || cameras.len() != frames {
        return Err(Error::DimensionMismatch(format!(
            "{frames} frames, {} masks, {} cameras",
            masks.len(),
            cameras.len()
        )));
    }

    let span = window.min(frames);
    let keep: Vec<bool> = (0..trajs.len())
        .into_par_iter()
        .map(|k| {
            let inside: Vec<bool> = (0..frames)
                .map(|t| in_foreground(trajs, masks, cameras, k, t))
                .collect();
            inside
                .windows(span)
                .any(|w| 2 * w.iter().filter(|&&b| b).count() > span)
        })
        .collect();

    let kept: Vec<usize> = (0..trajs.len()).filter(|&k| keep[k]).collect();
    let mut warnings = Vec::new();
    if kept.is_empty() {
        warnings.push("no trajectory intersects the foreground masks".to_string());
    }
    Ok(MaskOutcome {
        trajectories: trajs.select(&kept),
        kept,
        warnings,
    })
}

/// Scales positions so the first-frame bounding box has unit diagonal.
/// Returns the scaled set and the factor applied.
pub fn normalize_scene(trajs: &TrajectorySet) -> Result<(TrajectorySet, f64)> {
    if trajs.is_empty() {
        return Err(Error::EmptyForeground);
    }
    let diag = bbox_diagonal(&trajs.frame(0));
    if diag.is_nan() || diag <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let scale = 1.0 / diag;
    Ok((trajs.scaled(scale), scale))
}

pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (lo, hi) = points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Constant displacement per frame.
    Translation { velocity: Vec3 },
    /// Constant angular speed about `axis` through `pivot` (defaults to the
    /// moving region's center, or the interface plane center for two components).
    Rotation {
        axis: Vec3,
        deg_per_frame: f64,
        pivot: Option<Vec3>,
    },
    /// Sinusoidal translation `amplitude · sin(2π·frequency·t)`, `t` in frames.
    Oscillation { amplitude: Vec3, frequency: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub motion: Motion,
    pub frames: usize,
    pub trajectories: usize,
    pub region_min: Vec3,
    pub region_max: Vec3,
    /// 1: everything moves. 2: the lower-x half is a static body (label 0)
    /// and the upper-x half moves (label 1).
    pub components: usize,
    pub seed: u64,
}

impl MotionSpec {
    pub fn new(motion: Motion, frames: usize, trajectories: usize) -> Self {
        Self {
            motion,
            frames,
            trajectories,
            region_min: Vec3::new(-0.5, -0.5, -0.5),
            region_max: Vec3::new(0.5, 0.5, 0.5),
            components: 1,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.frames < 2 {
            return bad(format!("frames must be >= 2, got {}", self.frames));
        }
        if !(1..=2).contains(&self.components) {
            return bad(format!("components must be 1 or 2, got {}", self.components));
        }
        if self.trajectories < 3 * self.components {
            return bad(format!(
                "need at least {} trajectories for {} component(s)",
                3 * self.components,
                self.components
            ));
        }
        let extent = self.region_max - self.region_min;
        if !extent.iter().all(|e| e.is_finite() && *e > 0.0) {
            return bad("sampling region must have positive finite extent".into());
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        match &self.motion {
            Motion::Translation { velocity } if !finite(velocity) => bad("non-finite velocity".into()),
            Motion::Rotation {
                axis,
                deg_per_frame,
                pivot,
            } => {
                if !finite(axis) || axis.norm() == 0.0 {
                    return bad("rotation axis must be finite and non-zero".into());
                }
                if !deg_per_frame.is_finite() || pivot.as_ref().is_some_and(|p| !finite(p)) {
                    return bad("non-finite rotation parameter".into());
                }
                Ok(())
            }
            Motion::Oscillation { amplitude, frequency } if !finite(amplitude) || !frequency.is_finite() => {
                bad("non-finite oscillation parameter".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub trajectories: TrajectorySet,
    pub prior: SpatPrior,
}

/// Samples points uniformly in the motion's region box and moves them by an exactly
/// known rigid transform sequence, returned alongside as the ground-truth prior.
pub fn synthesize_scene(spec: &MotionSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = (spec.region_min, spec.region_max);
    let mid_x = 0.5 * (lo.x + hi.x);

    let mut initial = Vec::with_capacity(spec.trajectories);
    let mut labels = Vec::with_capacity(spec.trajectories);
    for k in 0..spec.trajectories {
        let label = if spec.components == 2 && k >= spec.trajectories / 2 {
            1
        } else {
            0
        };
        let (x_lo, x_hi) = match (spec.components, label) {
            (1, _) => (lo.x, hi.x),
            (_, 0) => (lo.x, mid_x),
            _ => (mid_x, hi.x),
        };
        initial.push(Vec3::new(
            rng.random_range(x_lo..x_hi),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        ));
        labels.push(label);
    }

    let moving_label = spec.components - 1;
    let steps = spec.frames - 1;
    let motion_steps: Vec<RigidTransform> = (0..steps).map(|t| step_transform(&spec.motion, t, spec)).collect();

    let mut positions = Vec::with_capacity(spec.trajectories * spec.frames);
    for (p0, &label) in initial.iter().zip(&labels) {
        let mut p = *p0;
        positions.push(p);
        for step in &motion_steps {
            if label == moving_label {
                p = step.apply(&p);
            }
            positions.push(p);
        }
    }
    let trajectories = TrajectorySet::new(positions, labels.clone(), spec.frames)?;

    let mut components = Vec::with_capacity(spec.components);
    let mut anchors = Vec::with_capacity(spec.components);
    for c in 0..spec.components {
        let members: Vec<Vec3> = initial
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| *p)
            .collect();
        anchors.push(centroid(&members));
        components.push(if c == moving_label {
            motion_steps.clone()
        } else {
            vec![RigidTransform::identity(); steps]
        });
    }
    let prior = SpatPrior::new(components, anchors, spec.frames)?;
    Ok(SyntheticScene { trajectories, prior })
}

fn step_transform(motion: &Motion, t: usize, spec: &MotionSpec) -> RigidTransform {
    match motion {
        Motion::Translation { velocity } => RigidTransform::from_translation(*velocity),
        Motion::Rotation {
            axis,
            deg_per_frame,
            pivot,
        } => {
            let default_pivot = {
                let mut c = 0.5 * (spec.region_min + spec.region_max);
                if spec.components == 2 {
                    c.x = 0.5 * (spec.region_min.x + spec.region_max.x);
                }
                c
            };
            let pivot = pivot.unwrap_or(default_pivot);
            RigidTransform::rotation_about_point(axis, deg_per_frame.to_radians(), &pivot)
        }
        Motion::Oscillation { amplitude, frequency } => {
            let phase = |t: f64| (2.0 * std::f64::consts::PI * frequency * t).sin();
            RigidTransform::from_translation(amplitude * (phase(t as f64 + 1.0) - phase(t as f64)))
        }
    }
}
