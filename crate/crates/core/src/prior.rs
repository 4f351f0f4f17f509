//! Per-component rigid motion priors: fitting from trajectories and
//! replaying onto arbitrary point sets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{centroid, umeyama_align, RigidTransform, Vec3, ROTATION_TOLERANCE};
use crate::trajectory::TrajectorySet;

/// A sequence of `T − 1` consecutive-frame rigid transforms per component,
/// plus each component's first-frame centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatPrior {
    components: Vec<Vec<RigidTransform>>,
    anchors: Vec<Vec3>,
    frames: usize,
}

impl SpatPrior {
    pub fn new(components: Vec<Vec<RigidTransform>>, anchors: Vec<Vec3>, frames: usize) -> Result<Self> {
        if frames < 2 {
            return Err(Error::InvalidParameter(format!(
                "prior needs >= 2 frames, got {frames}"
            )));
        }
        if components.len() != anchors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} components but {} anchors",
                components.len(),
                anchors.len()
            )));
        }
        for (c, steps) in components.iter().enumerate() {
            if steps.len() != frames - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "component {c} has {} steps, expected {}",
                    steps.len(),
                    frames - 1
                )));
            }
            if let Some(t) = steps.iter().position(|s| !s.is_proper(ROTATION_TOLERANCE)) {
                return Err(Error::InvalidParameter(format!(
                    "component {c} step {t}: rotation is not in SO(3)"
                )));
            }
        }
        Ok(Self {
            components,
            anchors,
            frames,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn steps(&self, component: usize) -> &[RigidTransform] {
        &self.components[component]
    }

    pub fn anchor(&self, component: usize) -> Vec3 {
        self.anchors[component]
    }

    pub fn anchors(&self) -> &[Vec3] {
        &self.anchors
    }
}

/// Fits one rigid transform per component and consecutive frame pair.
///
/// Every trajectory of a component contributes a correspondence, so the
/// fitted transform describes the whole rigid region rather than only the
/// tracked points.
pub fn build_prior(trajs: &TrajectorySet) -> Result<SpatPrior> {
    let count = trajs.component_count();
    if count == 0 {
        return Err(Error::EmptyForeground);
    }
    let frames = trajs.frames();
    let fitted: Vec<(Vec<RigidTransform>, Vec3)> = (0..count)
        .into_par_iter()
        .map(|c| {
            let members = trajs.component_members(c);
            if members.len() < 3 {
                return Err(Error::TooFewPoints { found: members.len() }.in_component(c, 0));
            }
            let frame = |t: usize| -> Vec<Vec3> { members.iter().map(|&k| trajs.position(k, t)).collect() };
            let mut steps = Vec::with_capacity(frames - 1);
            let mut current = frame(0);
            let anchor = centroid(&current);
            for t in 0..frames - 1 {
                let next = frame(t + 1);
                steps.push(umeyama_align(&current, &next).map_err(|e| e.in_component(c, t))?);
                current = next;
            }
            Ok((steps, anchor))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let (components, anchors) = fitted.into_iter().unzip();
    SpatPrior::new(components, anchors, frames)
}

/// Root-mean-square fit residual per component and step.
pub fn fit_residuals(prior: &SpatPrior, trajs: &TrajectorySet) -> Vec<Vec<f64>> {
    (0..prior.component_count())
        .map(|c| {
            let members = trajs.component_members(c);
            prior
                .steps(c)
                .iter()
                .enumerate()
                .map(|(t, step)| {
                    if members.is_empty() {
                        return 0.0;
                    }
                    let sum: f64 = members
                        .iter()
                        .map(|&k| (step.apply(&trajs.position(k, t)) - trajs.position(k, t + 1)).norm_squared())
                        .sum();
                    (sum / members.len() as f64).sqrt()
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Shift each target component so its centroid sits on the source anchor
    /// while the prior is applied, then shift back. Motion becomes independent
    /// of where the target is placed.
    #[default]
    Anchored,
    /// Apply `μ_{t+1} = R_t·μ_t + δ_t` literally.
    Raw,
}

/// Replays the prior on `points`; returns `T` frames, the first equal to `points`.
pub fn apply_prior(
    prior: &SpatPrior,
    points: &[Vec3],
    labels: &[usize],
    alignment: Alignment,
) -> Result<Vec<Vec<Vec3>>> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let count = prior.component_count();
    if let Some((point, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= count) {
        return Err(Error::LabelOutOfRange {
            point,
            label,
            components: count,
        });
    }

    let offsets: Vec<Vec3> = match alignment {
        Alignment::Raw => vec![Vec3::zeros(); count],
        Alignment::Anchored => (0..count)
            .map(|c| {
                let members: Vec<Vec3> = points
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(p, _)| *p)
                    .collect();
                if members.is_empty() {
                    Vec3::zeros()
                } else {
                    prior.anchor(c) - centroid(&members)
                }
            })
            .collect(),
    };

    let mut frames = Vec::with_capacity(prior.frames());
    frames.push(points.to_vec());
    // Positions in the anchored frame of their component.
    let mut shifted: Vec<Vec3> = points.iter().zip(labels).map(|(p, &l)| p + offsets[l]).collect();
    for t in 0..prior.frames() - 1 {
        shifted
            .par_iter_mut()
            .zip(labels.par_iter())
            .for_each(|(q, &l)| *q = prior.steps(l)[t].apply(q));
        frames.push(shifted.iter().zip(labels).map(|(q, &l)| q - offsets[l]).collect());
    }
    Ok(frames)
}
