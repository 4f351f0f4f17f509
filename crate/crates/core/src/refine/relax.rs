//! Damped Jacobi relaxation of the combined smoothness objective.

use rayon::prelude::*;

use super::boundary::BoundarySet;
use super::graph::NeighborGraph;
use super::loss::check_dims;
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::geometry::Vec3;

pub const DEFAULT_SWEEPS: usize = 5;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub lambda_topo: f64,
    pub lambda_kin: f64,
    pub sweeps: usize,
    /// Relaxation factor ω in (0, 1].
    pub damping: f64,
    /// Static speed threshold, scene units per frame.
    pub epsilon: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            lambda_topo: 1.0,
            lambda_kin: 1.0,
            sweeps: DEFAULT_SWEEPS,
            damping: DEFAULT_DAMPING,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda_topo >= 0.0 && self.lambda_topo.is_finite()) {
            return bad(format!("lambda_topo must be >= 0, got {}", self.lambda_topo));
        }
        if !(self.lambda_kin >= 0.0 && self.lambda_kin.is_finite()) {
            return bad(format!("lambda_kin must be >= 0, got {}", self.lambda_kin));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub kinematic: f64,
    pub topological: f64,
    /// `λ_kin·kinematic + λ_topo·topological`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepLoss {
    /// One entry per timestep, ascending.
    pub steps: Vec<StepLoss>,
    pub total: f64,
}

/// Losses before the first sweep (entry 0) and after each sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefineTrace {
    pub sweeps: Vec<SweepLoss>,
}

impl RefineTrace {
    pub fn totals(&self) -> Vec<f64> {
        self.sweeps.iter().map(|s| s.total).collect()
    }

    pub fn initial(&self) -> f64 {
        self.sweeps.first().map_or(0.0, |s| s.total)
    }

    pub fn last(&self) -> f64 {
        self.sweeps.last().map_or(0.0, |s| s.total)
    }
}

/// The problem relabeled into the graph's locality order.
struct Local<'g> {
    graph: std::borrow::Cow<'g, NeighborGraph>,
    /// Local position to original index; empty for the identity.
    order: Vec<u32>,
    /// Original index to local position; empty for the identity.
    inv: Vec<u32>,
    on_boundary: Vec<bool>,
    /// Per point, the local indices of its boundary neighbors in row order.
    incidence_offsets: Vec<usize>,
    incidence: Vec<u32>,
    boundary_size: usize,
}

impl<'g> Local<'g> {
    fn new(graph: &'g NeighborGraph, boundary: &BoundarySet) -> Self {
        let (local, order, inv) = match graph.layout() {
            Some(order) => {
                let mut inv = vec![0u32; order.len()];
                for (p, &i) in order.iter().enumerate() {
                    inv[i as usize] = p as u32;
                }
                (std::borrow::Cow::Owned(graph.relabeled(order)), order.to_vec(), inv)
            }
            None => (std::borrow::Cow::Borrowed(graph), Vec::new(), Vec::new()),
        };
        let mut me = Self {
            graph: local,
            order,
            inv,
            on_boundary: Vec::new(),
            incidence_offsets: Vec::new(),
            incidence: Vec::new(),
            boundary_size: boundary.len(),
        };
        let n = me.graph.len();
        me.on_boundary = vec![false; n];
        for &b in &boundary.indices {
            let p = me.local(b);
            me.on_boundary[p] = true;
        }
        me.incidence_offsets.push(0);
        for i in 0..n {
            if !boundary.is_empty() {
                let flags = &me.on_boundary;
                me.incidence
                    .extend(me.graph.neighbors(i).iter().copied().filter(|&j| flags[j as usize]));
            }
            me.incidence_offsets.push(me.incidence.len());
        }
        me
    }

    fn local(&self, original: usize) -> usize {
        if self.inv.is_empty() {
            original
        } else {
            self.inv[original] as usize
        }
    }

    fn incident(&self, i: usize) -> &[u32] {
        &self.incidence[self.incidence_offsets[i]..self.incidence_offsets[i + 1]]
    }

    fn to_local(&self, v: &[Vec3]) -> Vec<Vec3> {
        if self.order.is_empty() {
            v.to_vec()
        } else {
            self.order.iter().map(|&i| v[i as usize]).collect()
        }
    }

    fn to_original(&self, v: &[Vec3], out: &mut [Vec3]) {
        if self.order.is_empty() {
            out.copy_from_slice(v);
        } else {
            for (x, &i) in v.iter().zip(&self.order) {
                out[i as usize] = *x;
            }
        }
    }
}

struct Evaluation {
    /// Graph Laplacian `Σ_j (v_i − v_j)` per step. The acceleration
    /// Laplacian is the difference of consecutive entries.
    lap: Vec<Vec<Vec3>>,
    /// Boundary residuals `v_b − mean_{N(b)} v = lap_b / n_b`, zero elsewhere.
    residuals: Vec<Vec<Vec3>>,
    /// `residual_b / n_b`, zero elsewhere.
    shares: Vec<Vec<Vec3>>,
    loss: SweepLoss,
}

/// Timesteps gathered together in one pass over the neighbor lists.
const BLOCK: usize = 4;
const LANES: usize = 3 * BLOCK;

/// Steps `first..first + BLOCK` interleaved point-major as flat
/// coordinates, zero-padded. Flat lanes let the gathers vectorize.
fn interleave(v: &[Vec<Vec3>], first: usize, n: usize) -> Vec<[f64; LANES]> {
    let mut out = vec![[0.0; LANES]; n];
    for (b, step) in v[first..].iter().take(BLOCK).enumerate() {
        for (o, x) in out.iter_mut().zip(step) {
            o[3 * b..3 * b + 3].copy_from_slice(x.as_slice());
        }
    }
    out
}

fn lane(x: &[f64; LANES], b: usize) -> Vec3 {
    Vec3::new(x[3 * b], x[3 * b + 1], x[3 * b + 2])
}

/// `Σ_{j ∈ row} v_j` per lane, summed in row order.
#[inline]
fn row_sum(row: &[u32], v: &[[f64; LANES]]) -> [f64; LANES] {
    let mut acc = [0.0; LANES];
    for &j in row {
        let x = &v[j as usize];
        for c in 0..LANES {
            acc[c] += x[c];
        }
    }
    acc
}

/// Graph Laplacian `Σ_j (v_i − v_j)` of every step, summed in row order.
fn laplacian(graph: &NeighborGraph, v: &[Vec<Vec3>]) -> Vec<Vec<Vec3>> {
    let n = graph.len();
    let mut out = vec![vec![Vec3::zeros(); n]; v.len()];
    for first in (0..v.len()).step_by(BLOCK) {
        let block = interleave(v, first, n);
        let lap: Vec<[f64; LANES]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let vi = &block[i];
                let mut acc = [0.0; LANES];
                for &j in graph.neighbors(i) {
                    let x = &block[j as usize];
                    for c in 0..LANES {
                        acc[c] += vi[c] - x[c];
                    }
                }
                acc
            })
            .collect();
        for (b, step) in out[first..].iter_mut().take(BLOCK).enumerate() {
            for (o, l) in step.iter_mut().zip(&lap) {
                *o = lane(l, b);
            }
        }
    }
    out
}

/// Losses use the quadratic forms `Σ_i Σ_j ‖x_i − x_j‖² = 2 Σ_i x_i·(Lx)_i`
/// (symmetric graph), so one neighbor pass per step serves both the losses
/// and the update. Sums run in original index order.
fn evaluate(v: &[Vec<Vec3>], local: &Local<'_>, boundary: &BoundarySet, cfg: &RefinementConfig) -> Evaluation {
    let graph = &*local.graph;
    let n = graph.len();
    let steps = v.len();
    let lap = laplacian(graph, v);
    let mut residuals = Vec::with_capacity(steps);
    let mut shares = Vec::with_capacity(steps);
    let mut losses = Vec::with_capacity(steps);
    for s in 0..steps {
        let now = &v[s];
        let next = (s + 1 < steps).then(|| (&v[s + 1], &lap[s + 1]));
        let per_point: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut q = now[i].dot(&lap[s][i]);
                if let Some((v1, l1)) = next {
                    q += (v1[i] - now[i]).dot(&(l1[i] - lap[s][i]));
                }
                q
            })
            .collect();
        let kinematic = (2.0 * (0..n).map(|i| per_point[local.local(i)]).sum::<f64>()).max(0.0);
        let mut r = vec![Vec3::zeros(); if boundary.is_empty() { 0 } else { n }];
        let mut q = r.clone();
        for &b in &boundary.indices {
            let p = local.local(b);
            let deg = graph.degree(p);
            if deg > 0 {
                r[p] = lap[s][p] / deg as f64;
                q[p] = r[p] / deg as f64;
            }
        }
        let topological = if boundary.is_empty() {
            0.0
        } else {
            boundary
                .indices
                .iter()
                .map(|&b| r[local.local(b)].norm_squared())
                .sum::<f64>()
                / boundary.len() as f64
        };
        residuals.push(r);
        shares.push(q);
        losses.push(StepLoss {
            kinematic,
            topological,
            total: cfg.lambda_kin * kinematic + cfg.lambda_topo * topological,
        });
    }
    let total = losses.iter().map(|l| l.total).sum();
    Evaluation {
        lap,
        residuals,
        shares,
        loss: SweepLoss { steps: losses, total },
    }
}

/// Runs `config.sweeps` damped Jacobi sweeps on
/// `Σ_t λ_kin·L_kin^t + λ_topo·L_topo^t`.
///
/// Each velocity moves a fraction ω toward the exact minimizer of the
/// objective in that variable, with every other variable held at its
/// previous-sweep value. The coupling runs through spatial neighbors, the
/// adjacent timesteps via the acceleration term, and, for points next to the
/// boundary, the boundary residuals they contribute to.
pub fn refine(
    field: &VelocityField,
    graph: &NeighborGraph,
    boundary: &BoundarySet,
    config: &RefinementConfig,
) -> Result<(VelocityField, RefineTrace)> {
    config.validate()?;
    check_dims(field, graph, Some(boundary))?;
    let steps = field.steps();
    let local = Local::new(graph, boundary);
    let lg = &*local.graph;
    let n = lg.len();
    let w = if boundary.is_empty() {
        0.0
    } else {
        config.lambda_topo / local.boundary_size as f64
    };
    // Topological diagonal is the same at every step.
    let topo_diag: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = if local.on_boundary[i] && lg.degree(i) > 0 {
                w
            } else {
                0.0
            };
            own + local
                .incident(i)
                .iter()
                .map(|&j| {
                    let d = lg.degree(j as usize) as f64;
                    w / (d * d)
                })
                .sum::<f64>()
        })
        .collect();

    let mut current: Vec<Vec<Vec3>> = (0..steps).map(|s| local.to_local(field.step(s))).collect();
    let mut eval = evaluate(&current, &local, boundary, config);
    let mut trace = RefineTrace {
        sweeps: vec![eval.loss.clone()],
    };
    let lk2 = 2.0 * config.lambda_kin;

    for _ in 0..config.sweeps {
        let mut next = current.clone();
        for first in (0..steps).step_by(BLOCK) {
            // Boundary shares of each point's neighbors, for this block of steps.
            let pulled: Vec<[f64; LANES]> = if w > 0.0 {
                let shares = interleave(&eval.shares, first, n);
                (0..n)
                    .into_par_iter()
                    .map(|i| row_sum(local.incident(i), &shares))
                    .collect()
            } else {
                Vec::new()
            };
            for s in first..steps.min(first + BLOCK) {
                let has_next = s + 1 < steps;
                let has_prev = s > 0;
                let temporal = 1.0 + f64::from(u8::from(has_next)) + f64::from(u8::from(has_prev));
                let lap = &eval.lap;
                let residuals = &eval.residuals[s];
                let old = &current[s];
                let pulled = &pulled;
                next[s].par_iter_mut().enumerate().for_each(|(i, v)| {
                    let here = lap[s][i];
                    let mut grad = here;
                    if has_next {
                        grad -= lap[s + 1][i] - here;
                    }
                    if has_prev {
                        grad += here - lap[s - 1][i];
                    }
                    grad *= lk2;
                    let diag = lk2 * lg.degree(i) as f64 * temporal + topo_diag[i];
                    if w > 0.0 {
                        if local.on_boundary[i] {
                            grad += residuals[i] * w;
                        }
                        grad -= lane(&pulled[i], s - first) * w;
                    }
                    if diag > 0.0 {
                        *v = old[i] - grad * (config.damping / diag);
                    }
                });
            }
        }
        current = next;
        eval = evaluate(&current, &local, boundary, config);
        trace.sweeps.push(eval.loss.clone());
    }
    let mut out = field.clone();
    for (s, v) in current.iter().enumerate() {
        local.to_original(v, out.step_mut(s));
    }
    Ok((out, trace))
}
