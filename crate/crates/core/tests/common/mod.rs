//! Brute-force reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the library's algorithms.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidflow::{Mat3, Vec3, VelocityField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut impl Rng, extent: f64) -> Vec3 {
    if extent == 0.0 {
        return Vec3::zeros();
    }
    Vec3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    )
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Vec3> {
    (0..n).map(|_| random_point(rng, extent)).collect()
}

/// Uniform rotation from a normalized Gaussian-ish quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-3 && n2 <= 1.0 {
            let n = n2.sqrt();
            return quaternion_matrix(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        }
    }
}

pub fn quaternion_matrix(w: f64, x: f64, y: f64, z: f64) -> Mat3 {
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn random_field(rng: &mut impl Rng, points: usize, steps: usize, scale: f64) -> VelocityField {
    let data = (0..points * steps).map(|_| random_point(rng, scale)).collect();
    VelocityField::new(points, steps, data).unwrap()
}

pub fn d2(a: &Vec3, b: &Vec3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

/// Symmetrized k-NN by exhaustive sort. Rows ordered by (distance², index).
pub fn knn_oracle(points: &[Vec3], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            d2(&points[i], &points[a])
                .total_cmp(&d2(&points[i], &points[b]))
                .then(a.cmp(&b))
        });
        for &j in others.iter().take(k) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    (0..n)
        .map(|i| {
            let mut row: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
            row.sort_by(|&a, &b| {
                d2(&points[i], &points[a])
                    .total_cmp(&d2(&points[i], &points[b]))
                    .then(a.cmp(&b))
            });
            row
        })
        .collect()
}

pub fn adjacency(lists: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = lists.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in lists.iter().enumerate() {
        for &j in row {
            adj[i][j] = true;
        }
    }
    adj
}

/// Random undirected graph as sorted adjacency lists.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).collect()).collect()
}

pub fn edges(lists: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, row) in lists.iter().enumerate() {
        for &j in row {
            if i < j {
                out.push((i, j));
            }
        }
    }
    out
}

/// `Σ_i Σ_j adj[i][j]·(‖Δv‖² + [has next]‖Δa‖²)` at 1-based timestep `t`.
pub fn kinematic_oracle(field: &VelocityField, lists: &[Vec<usize>], t: usize) -> f64 {
    let adj = adjacency(lists);
    let n = lists.len();
    let s = t - 1;
    let has_next = s + 1 < field.steps();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if !adj[i][j] {
                continue;
            }
            let vi = field.velocity(s, i);
            let vj = field.velocity(s, j);
            let dv = vi - vj;
            total += dv.x * dv.x + dv.y * dv.y + dv.z * dv.z;
            if has_next {
                let ai = field.velocity(s + 1, i) - vi;
                let aj = field.velocity(s + 1, j) - vj;
                let da = ai - aj;
                total += da.x * da.x + da.y * da.y + da.z * da.z;
            }
        }
    }
    total
}

/// `(1/M) Σ_b ‖v_b − mean of neighbors‖²`.
pub fn topological_oracle(field: &VelocityField, lists: &[Vec<usize>], boundary: &[usize], t: usize) -> f64 {
    if boundary.is_empty() {
        return 0.0;
    }
    let adj = adjacency(lists);
    let s = t - 1;
    let mut total = 0.0;
    for &b in boundary {
        let mut mean = Vec3::zeros();
        let mut count = 0.0;
        for j in 0..lists.len() {
            if adj[b][j] {
                mean += field.velocity(s, j);
                count += 1.0;
            }
        }
        if count > 0.0 {
            let r = field.velocity(s, b) - mean / count;
            total += r.x * r.x + r.y * r.y + r.z * r.z;
        }
    }
    total / boundary.len() as f64
}

pub fn cross_label_oracle(lists: &[Vec<usize>], labels: &[usize]) -> Vec<usize> {
    let adj = adjacency(lists);
    let n = lists.len();
    (0..n)
        .filter(|&i| (0..n).any(|j| adj[i][j] && labels[j] != labels[i]))
        .collect()
}

/// Hop distances by repeated relaxation over the adjacency matrix.
pub fn hop_distances(lists: &[Vec<usize>], seeds: &[usize]) -> Vec<Option<usize>> {
    let adj = adjacency(lists);
    let n = lists.len();
    let mut dist: Vec<Option<usize>> = vec![None; n];
    for &s in seeds {
        dist[s] = Some(0);
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if let (true, Some(di)) = (adj[i][j], dist[i]) {
                    if dist[j].is_none_or(|dj| di + 1 < dj) {
                        dist[j] = Some(di + 1);
                        changed = true;
                    }
                }
            }
        }
    }
    dist
}

pub fn flood_fill_oracle(lists: &[Vec<usize>], labels: &[usize], seeds: &[usize], hops: usize) -> Vec<usize> {
    let dist = hop_distances(lists, seeds);
    cross_label_oracle(lists, labels)
        .into_iter()
        .filter(|&i| dist[i].is_some_and(|d| d <= hops))
        .collect()
}

/// Per-seed O(n²) Dijkstra; nearest (distance, seed order) wins, unreachable
/// points fall back to the Euclidean-nearest seed.
pub fn geodesic_label_oracle(points: &[Vec3], lists: &[Vec<usize>], seeds: &[(usize, usize)]) -> Vec<usize> {
    let n = points.len();
    let per_seed: Vec<Vec<f64>> = seeds
        .iter()
        .map(|&(s, _)| {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            loop {
                let mut u = None;
                for i in 0..n {
                    if !done[i] && dist[i].is_finite() && u.is_none_or(|x: usize| dist[i] < dist[x]) {
                        u = Some(i);
                    }
                }
                let Some(u) = u else { break };
                done[u] = true;
                for &j in &lists[u] {
                    let cand = dist[u] + (points[j] - points[u]).norm();
                    if cand < dist[j] {
                        dist[j] = cand;
                    }
                }
            }
            dist
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut best: Option<usize> = None;
            for r in 0..seeds.len() {
                if per_seed[r][i].is_finite() && best.is_none_or(|b| per_seed[r][i] < per_seed[b][i]) {
                    best = Some(r);
                }
            }
            let r = best.unwrap_or_else(|| {
                let mut r = 0;
                for c in 1..seeds.len() {
                    if d2(&points[seeds[c].0], &points[i]) < d2(&points[seeds[r].0], &points[i]) {
                        r = c;
                    }
                }
                r
            });
            seeds[r].1
        })
        .collect()
}

/// Field that is constant per label plus optional noise, for refinement runs.
pub fn corrupted_field(rng: &mut impl Rng, labels: &[usize], steps: usize, noise: f64) -> VelocityField {
    let base: Vec<Vec<Vec3>> = (0..steps)
        .map(|_| {
            (0..=labels.iter().copied().max().unwrap_or(0))
                .map(|_| random_point(rng, 1.0))
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(labels.len() * steps);
    for step in &base {
        for &l in labels {
            data.push(step[l] + random_point(rng, noise));
        }
    }
    VelocityField::new(labels.len(), steps, data).unwrap()
}

/// Standard normal sample by Box-Muller.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}
