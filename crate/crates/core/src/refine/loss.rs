//! Kinematic and topological smoothness losses.
//!
//! Timesteps are 1-based here: `t` ranges over `1..=steps` and refers to
//! velocity `v_t` stored at step index `t − 1`.

use rayon::prelude::*;

use super::boundary::BoundarySet;
use super::graph::NeighborGraph;
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::geometry::Vec3;

pub(crate) fn check_dims(field: &VelocityField, graph: &NeighborGraph, boundary: Option<&BoundarySet>) -> Result<()> {
    if field.points() != graph.len() {
        return Err(Error::DimensionMismatch(format!(
            "field over {} points, graph over {}",
            field.points(),
            graph.len()
        )));
    }
    if let Some(b) = boundary {
        if let Some(&i) = b.indices.iter().find(|&&i| i >= graph.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                limit: graph.len(),
            });
        }
    }
    Ok(())
}

fn check_step(field: &VelocityField, t: usize) -> Result<usize> {
    if t == 0 || t > field.steps() {
        return Err(Error::IndexOutOfRange {
            index: t,
            limit: field.steps() + 1,
        });
    }
    Ok(t - 1)
}

/// Per-point kinematic contribution at step index `s` (0-based), plus the
/// graph Laplacians of velocity and, when it exists, acceleration.
#[inline]
pub(crate) fn kinematic_point(
    graph: &NeighborGraph,
    now: &[Vec3],
    next: Option<&[Vec3]>,
    i: usize,
) -> (f64, Vec3, Vec3) {
    let mut loss = 0.0;
    let mut lap_v = Vec3::zeros();
    let mut lap_a = Vec3::zeros();
    let vi = now[i];
    match next {
        Some(next) => {
            let ai = next[i] - vi;
            for &j in graph.neighbors(i) {
                let j = j as usize;
                let dv = vi - now[j];
                let da = ai - (next[j] - now[j]);
                loss += dv.norm_squared() + da.norm_squared();
                lap_v += dv;
                lap_a += da;
            }
        }
        None => {
            for &j in graph.neighbors(i) {
                let dv = vi - now[j as usize];
                loss += dv.norm_squared();
                lap_v += dv;
            }
        }
    }
    (loss, lap_v, lap_a)
}

/// `Σ_i Σ_{j∈N(i)} ‖v_t,i − v_t,j‖² + [t < T−1] ‖a_t,i − a_t,j‖²`.
pub fn kinematic_loss(field: &VelocityField, graph: &NeighborGraph, t: usize) -> Result<f64> {
    check_dims(field, graph, None)?;
    let s = check_step(field, t)?;
    let now = field.step(s);
    let next = (s + 1 < field.steps()).then(|| field.step(s + 1));
    let per_point: Vec<f64> = (0..graph.len())
        .into_par_iter()
        .map(|i| kinematic_point(graph, now, next, i).0)
        .collect();
    Ok(per_point.iter().sum())
}

/// `v_b − mean_{N(b)} v` for one boundary point; zero for isolated points.
#[inline]
pub(crate) fn boundary_residual(graph: &NeighborGraph, step: &[Vec3], b: usize) -> Vec3 {
    let row = graph.neighbors(b);
    if row.is_empty() {
        return Vec3::zeros();
    }
    let sum: Vec3 = row.iter().map(|&j| step[j as usize]).sum();
    step[b] - sum / row.len() as f64
}

pub(crate) fn topological_step(graph: &NeighborGraph, step: &[Vec3], boundary: &BoundarySet) -> (f64, Vec<Vec3>) {
    if boundary.is_empty() {
        return (0.0, Vec::new());
    }
    let residuals: Vec<Vec3> = boundary
        .indices
        .par_iter()
        .map(|&b| boundary_residual(graph, step, b))
        .collect();
    let sum: f64 = residuals.iter().map(|r| r.norm_squared()).sum();
    (sum / boundary.len() as f64, residuals)
}

/// `(1/M) Σ_{b∈B} ‖v_t,b − mean_{N(b)} v_t‖²`, zero for an empty boundary.
pub fn topological_loss(field: &VelocityField, boundary: &BoundarySet, graph: &NeighborGraph, t: usize) -> Result<f64> {
    check_dims(field, graph, Some(boundary))?;
    let s = check_step(field, t)?;
    Ok(topological_step(graph, field.step(s), boundary).0)
}
