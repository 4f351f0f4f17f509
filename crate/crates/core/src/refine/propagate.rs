//! Pseudo-velocities for points left nearly still by the transfer.

use rayon::prelude::*;

use super::graph::NeighborGraph;
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StaticMode {
    /// Every static point takes the mean velocity of all dynamic points.
    Global,
    /// Each static point takes the mean velocity of its dynamic neighbors.
    #[default]
    Neighborhood,
}

impl std::str::FromStr for StaticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(StaticMode::Global),
            "neighborhood" => Ok(StaticMode::Neighborhood),
            other => Err(Error::InvalidParameter(format!(
                "unknown static mode '{other}' (global|neighborhood)"
            ))),
        }
    }
}

impl std::fmt::Display for StaticMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StaticMode::Global => "global",
            StaticMode::Neighborhood => "neighborhood",
        })
    }
}

/// Per timestep, points slower than `epsilon` form the static set; they
/// receive a velocity drawn from the dynamic set according to `mode`.
/// `graph` is required for [`StaticMode::Neighborhood`] only.
pub fn propagate_static(
    field: &VelocityField,
    graph: Option<&NeighborGraph>,
    epsilon: f64,
    mode: StaticMode,
) -> Result<VelocityField> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    let graph = match (mode, graph) {
        (StaticMode::Neighborhood, None) => {
            return Err(Error::InvalidParameter("neighborhood propagation needs a graph".into()))
        }
        (StaticMode::Neighborhood, Some(g)) if g.len() != field.points() => {
            return Err(Error::DimensionMismatch(format!(
                "field over {} points, graph over {}",
                field.points(),
                g.len()
            )))
        }
        (_, g) => g,
    };

    let mut out = field.clone();
    for s in 0..field.steps() {
        let step = field.step(s);
        let dynamic: Vec<bool> = step.iter().map(|v| v.norm() >= epsilon).collect();
        if !dynamic.iter().any(|&d| d) {
            continue;
        }
        match mode {
            StaticMode::Global => {
                let (sum, count) = step
                    .iter()
                    .zip(&dynamic)
                    .filter(|(_, &d)| d)
                    .fold((Vec3::zeros(), 0usize), |(s, c), (v, _)| (s + v, c + 1));
                let mean = sum / count as f64;
                for (v, &d) in out.step_mut(s).iter_mut().zip(&dynamic) {
                    if !d {
                        *v = mean;
                    }
                }
            }
            StaticMode::Neighborhood => {
                let graph = graph.expect("checked above");
                out.step_mut(s).par_iter_mut().enumerate().for_each(|(i, v)| {
                    if dynamic[i] {
                        return;
                    }
                    let mut sum = Vec3::zeros();
                    let mut count = 0usize;
                    for &j in graph.neighbors(i) {
                        if dynamic[j as usize] {
                            sum += step[j as usize];
                            count += 1;
                        }
                    }
                    if count > 0 {
                        *v = sum / count as f64;
                    }
                });
            }
        }
    }
    Ok(out)
}
