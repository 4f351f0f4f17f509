//! Explicit per-point velocity fields: materialization from a prior, Euler
//! integration, and speed/length controls.

use rayon::prelude::*;

use crate::cloud::TargetCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::prior::{apply_prior, Alignment, SpatPrior};

/// `(T − 1) × N` per-step displacements, frame-major. One step is one frame,
/// so integration carries no explicit timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    points: usize,
    steps: usize,
    data: Vec<Vec3>,
}

impl VelocityField {
    pub fn new(points: usize, steps: usize, data: Vec<Vec3>) -> Result<Self> {
        if data.len() != points * steps {
            return Err(Error::DimensionMismatch(format!(
                "{} velocities for {points} points x {steps} steps",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "non-finite velocity at step {} point {}",
                i / points.max(1),
                i % points.max(1)
            )));
        }
        Ok(Self { points, steps, data })
    }

    pub fn zeros(points: usize, steps: usize) -> Self {
        Self {
            points,
            steps,
            data: vec![Vec3::zeros(); points * steps],
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Frame count `T = steps + 1`.
    pub fn frames(&self) -> usize {
        self.steps + 1
    }

    pub fn data(&self) -> &[Vec3] {
        &self.data
    }

    pub fn step(&self, t: usize) -> &[Vec3] {
        &self.data[t * self.points..(t + 1) * self.points]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [Vec3] {
        &mut self.data[t * self.points..(t + 1) * self.points]
    }

    #[inline]
    pub fn velocity(&self, t: usize, i: usize) -> Vec3 {
        self.data[t * self.points + i]
    }

    #[inline]
    pub fn velocity_mut(&mut self, t: usize, i: usize) -> &mut Vec3 {
        &mut self.data[t * self.points + i]
    }

    /// `a_t,i = v_{t+1,i} − v_t,i`, defined for `t < steps − 1`.
    pub fn acceleration(&self, t: usize, i: usize) -> Vec3 {
        self.velocity(t + 1, i) - self.velocity(t, i)
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3 + Sync + Send) -> Self {
        Self {
            points: self.points,
            steps: self.steps,
            data: self.data.par_iter().map(f).collect(),
        }
    }

    /// Reorders points: output point `i` is input point `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for t in 0..self.steps {
            let step = self.step(t);
            data.extend(order.iter().map(|&i| step[i]));
        }
        Self {
            points: order.len(),
            steps: self.steps,
            data,
        }
    }
}

pub fn compute_field(prior: &SpatPrior, cloud: &TargetCloud) -> Result<VelocityField> {
    compute_field_with(prior, cloud, Alignment::Anchored)
}

/// Rolls the cloud forward through the prior and differences consecutive frames.
pub fn compute_field_with(prior: &SpatPrior, cloud: &TargetCloud, alignment: Alignment) -> Result<VelocityField> {
    let frames = apply_prior(prior, &cloud.positions, &cloud.labels, alignment)?;
    let mut data = Vec::with_capacity(cloud.len() * (frames.len() - 1));
    for pair in frames.windows(2) {
        data.extend(pair[1].iter().zip(&pair[0]).map(|(b, a)| b - a));
    }
    VelocityField::new(cloud.len(), frames.len() - 1, data)
}

pub fn integrate(cloud: &TargetCloud, field: &VelocityField) -> Result<Vec<Vec<Vec3>>> {
    integrate_positions(&cloud.positions, field)
}

/// Euler integration `μ_{t+1} = μ_t + v_t`; returns `T` frames.
pub fn integrate_positions(start: &[Vec3], field: &VelocityField) -> Result<Vec<Vec<Vec3>>> {
    if start.len() != field.points() {
        return Err(Error::DimensionMismatch(format!(
            "field over {} points, cloud has {}",
            field.points(),
            start.len()
        )));
    }
    let mut frames = Vec::with_capacity(field.frames());
    frames.push(start.to_vec());
    for t in 0..field.steps() {
        let next: Vec<Vec3> = frames[t].iter().zip(field.step(t)).map(|(p, v)| p + v).collect();
        frames.push(next);
    }
    Ok(frames)
}

/// Multiplies every velocity by `factor`; negative factors reverse the motion.
pub fn scale_field(field: &VelocityField, factor: f64) -> Result<VelocityField> {
    if !factor.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale factor must be finite, got {factor}"
        )));
    }
    Ok(field.map(|v| v * factor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtendMode {
    /// Concatenate copies.
    #[default]
    Loop,
    /// Each cycle plays the field forward, then time-reversed and negated,
    /// returning to the start.
    PingPong,
}

impl std::str::FromStr for ExtendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loop" => Ok(ExtendMode::Loop),
            "pingpong" => Ok(ExtendMode::PingPong),
            other => Err(Error::InvalidParameter(format!(
                "unknown extend mode '{other}' (loop|pingpong)"
            ))),
        }
    }
}

impl std::fmt::Display for ExtendMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtendMode::Loop => "loop",
            ExtendMode::PingPong => "pingpong",
        })
    }
}

pub fn extend_field(field: &VelocityField, repeats: usize, mode: ExtendMode) -> Result<VelocityField> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    let cycle = if mode == ExtendMode::PingPong { 2 } else { 1 };
    let steps = field.steps() * repeats * cycle;
    let mut data = Vec::with_capacity(field.points() * steps);
    for _ in 0..repeats {
        data.extend_from_slice(&field.data);
        if mode == ExtendMode::PingPong {
            for t in (0..field.steps()).rev() {
                data.extend(field.step(t).iter().map(|v| -v));
            }
        }
    }
    VelocityField::new(field.points(), steps, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RigidTransform, Vec3};

    fn cloud() -> TargetCloud {
        TargetCloud::from_positions(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.5),
            Vec3::new(0.3, 0.2, -0.4),
        ])
        .unwrap()
    }

    fn prior_from(steps: Vec<RigidTransform>) -> SpatPrior {
        let frames = steps.len() + 1;
        SpatPrior::new(vec![steps], vec![Vec3::zeros()], frames).unwrap()
    }

    #[test]
    fn identity_prior_gives_zero_field() {
        let f = compute_field(&prior_from(vec![RigidTransform::identity(); 4]), &cloud()).unwrap();
        assert_eq!(f.steps(), 4);
        assert!(f.data().iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn constant_translation_field() {
        let d = Vec3::new(0.25, -0.5, 0.125);
        let f = compute_field(&prior_from(vec![RigidTransform::from_translation(d); 3]), &cloud()).unwrap();
        assert!(f.data().iter().all(|v| (v - d).amax() < 1e-15));
    }

    #[test]
    fn rotation_speeds_match_angular_velocity() {
        let c = cloud();
        let theta = 0.05;
        let prior = SpatPrior::new(
            vec![vec![RigidTransform::axis_angle(&Vec3::z(), theta); 2]],
            vec![crate::geometry::centroid(&c.positions)],
            3,
        )
        .unwrap();
        let f = compute_field(&prior, &c).unwrap();
        // The anchor is the cloud's own centroid, so the rotation acts about the
        // world z axis: speed = 2 r sin(θ/2), r = distance to that axis.
        for i in 0..c.len() {
            let r = c.positions[i];
            let radial = (r.x * r.x + r.y * r.y).sqrt();
            assert!((f.velocity(0, i).norm() - 2.0 * radial * (theta / 2.0).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn integrate_reproduces_apply_prior() {
        let c = cloud();
        let prior = prior_from(vec![
            RigidTransform::new(
                crate::geometry::rotation_about(&Vec3::new(1.0, 2.0, 0.5), 0.2),
                Vec3::new(0.1, 0.0, -0.2),
            );
            6
        ]);
        let field = compute_field(&prior, &c).unwrap();
        let integrated = integrate(&c, &field).unwrap();
        let direct = apply_prior(&prior, &c.positions, &c.labels, Alignment::Anchored).unwrap();
        for (a, b) in integrated.iter().flatten().zip(direct.iter().flatten()) {
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_field_gives_identical_frames() {
        let c = cloud();
        let frames = integrate(&c, &VelocityField::zeros(c.len(), 5)).unwrap();
        assert_eq!(frames.len(), 6);
        assert!(frames.iter().all(|f| *f == c.positions));
        assert!(matches!(
            integrate(&c, &VelocityField::zeros(3, 5)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn scale_identity_and_zero() {
        let d = Vec3::new(0.25, -0.5, 0.125);
        let f = compute_field(&prior_from(vec![RigidTransform::from_translation(d); 3]), &cloud()).unwrap();
        assert_eq!(scale_field(&f, 1.0).unwrap(), f);
        assert!(scale_field(&f, 0.0).unwrap().data().iter().all(|v| *v == Vec3::zeros()));
        assert!(scale_field(&f, f64::NAN).is_err());
    }

    #[test]
    fn extend_loop_and_pingpong() {
        let d = Vec3::new(0.5, 0.25, 0.0);
        let c = cloud();
        let f = compute_field(&prior_from(vec![RigidTransform::from_translation(d); 3]), &c).unwrap();
        assert_eq!(extend_field(&f, 1, ExtendMode::Loop).unwrap(), f);

        let looped = extend_field(&f, 3, ExtendMode::Loop).unwrap();
        assert_eq!(looped.steps(), 9);
        let end = integrate(&c, &looped).unwrap().pop().unwrap();
        for (a, b) in end.iter().zip(&c.positions) {
            assert!((a - b - d * 9.0).amax() < 1e-12);
        }

        let pp = extend_field(&f, 1, ExtendMode::PingPong).unwrap();
        assert_eq!(pp.steps(), 6);
        let end = integrate(&c, &pp).unwrap().pop().unwrap();
        for (a, b) in end.iter().zip(&c.positions) {
            assert!((a - b).amax() < 1e-9);
        }
        assert!(extend_field(&f, 0, ExtendMode::Loop).is_err());
    }
}
