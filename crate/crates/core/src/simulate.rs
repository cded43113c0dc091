//! Synthetic ground truths with a controlled expected degree, and Bernoulli
//! sampling of adjacency matrices from them.
//!
//! Expected degree here is `(1/n) * sum_{i != j} P_ij`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair_count, Graph, ProbMatrix};
use crate::rng::{derive_seed, row_stream, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Graphon1,
    Graphon2,
    Graphon3,
    Sbm6,
    Lsm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Graphon1, ModelKind::Graphon2, ModelKind::Graphon3, ModelKind::Sbm6, ModelKind::Lsm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Graphon1 => "graphon1",
            ModelKind::Graphon2 => "graphon2",
            ModelKind::Graphon3 => "graphon3",
            ModelKind::Sbm6 => "sbm6",
            ModelKind::Lsm => "lsm",
        }
    }

    pub fn is_graphon(self) -> bool {
        matches!(self, ModelKind::Graphon1 | ModelKind::Graphon2 | ModelKind::Graphon3)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown model `{s}` (expected graphon1, graphon2, graphon3, sbm6 or lsm)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub target_degree: f64,
    pub seed: u64,
    /// Latent dimension for the latent space model.
    pub latent_dim: usize,
    /// Block matrix for the block model; `None` uses the six-block default.
    pub block_matrix: Option<Vec<Vec<f64>>>,
    /// Draw graphon positions uniformly at random instead of on the grid.
    pub random_latents: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n: usize, target_degree: f64, seed: u64) -> Self {
        ModelSpec { kind, n, target_degree, seed, latent_dim: 4, block_matrix: None, random_latents: false }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain(format!("model needs at least 2 nodes, got {}", self.n)));
        }
        let max = (self.n - 1) as f64;
        if !(self.target_degree > 0.0 && self.target_degree <= max) {
            return Err(Error::domain(format!("target degree {} must lie in (0, {max}]", self.target_degree)));
        }
        Ok(())
    }
}

/// The block-model default: 0.5 within blocks, 0.1 between, before scaling.
pub fn default_block_matrix() -> Vec<Vec<f64>> {
    (0..6).map(|a| (0..6).map(|b| if a == b { 0.5 } else { 0.1 }).collect()).collect()
}

const BARS: [[f64; 3]; 3] = [[0.9, 0.4, 0.1], [0.4, 0.7, 0.3], [0.1, 0.3, 0.8]];

/// Unscaled graphon kernel `W(u, v)` for the three graphon models.
pub fn graphon_kernel(kind: ModelKind, u: f64, v: f64) -> f64 {
    match kind {
        ModelKind::Graphon1 => {
            let bar = |x: f64| ((3.0 * x).ceil() as usize).clamp(1, 3) - 1;
            BARS[bar(u)][bar(v)]
        }
        ModelKind::Graphon2 => 0.5 + 0.4 * (5.0 * std::f64::consts::PI * (u + v)).sin(),
        ModelKind::Graphon3 => 0.9 * (-3.0 * (u - v).abs().powf(0.8)).exp(),
        other => panic!("{other} is not a graphon model"),
    }
}

/// Grid positions `(i - 0.5) / n`, or sorted uniforms when `random` is set.
pub fn latent_positions(n: usize, random: bool, seed: u64) -> Vec<f64> {
    if !random {
        return (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    }
    let mut rng = seeded(derive_seed(seed, "positions", 0));
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Unscaled graphon evaluated at the model's latent positions.
pub fn graphon_kernel_matrix(spec: &ModelSpec) -> Result<ProbMatrix> {
    if !spec.kind.is_graphon() {
        return Err(Error::domain(format!("{} is not a graphon model", spec.kind)));
    }
    let u = latent_positions(spec.n, spec.random_latents, spec.seed);
    Ok(ProbMatrix::from_fn(spec.n, |i, j| graphon_kernel(spec.kind, u[i], u[j])))
}

fn degree_of(upper: &[f64], n: usize, f: impl Fn(f64) -> f64) -> f64 {
    2.0 * upper.iter().map(|&w| f(w)).sum::<f64>() / n as f64
}

/// Finds `alpha` with `(2/n) * sum min(1, alpha * w) = target` by bisection.
fn calibrate_scale(weights: &[f64], n: usize, target: f64) -> Result<f64> {
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::domain("kernel values must be finite and non-negative"));
    }
    let smallest_positive = weights.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    if !smallest_positive.is_finite() {
        return Err(Error::InfeasibleDegree { target, max: 0.0 });
    }
    let clip = |alpha: f64| move |w: f64| (alpha * w).min(1.0);
    let mut hi = 1.0 / smallest_positive;
    let max = degree_of(weights, n, clip(hi));
    if target > max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleDegree { target, max });
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = degree_of(weights, n, clip(mid));
        if (d - target).abs() <= 1e-12 * target {
            return Ok(mid);
        }
        if d < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn scale_to_degree(kernel: ProbMatrix, target: f64) -> Result<ProbMatrix> {
    let n = kernel.n();
    let alpha = calibrate_scale(kernel.upper(), n, target)?;
    let upper = kernel.upper().iter().map(|&w| (alpha * w).min(1.0)).collect();
    ProbMatrix::from_upper(n, upper)
}

/// `P = min(1, alpha * W)` with `alpha` matched to the target degree.
pub fn graphon_matrix(spec: &ModelSpec) -> Result<ProbMatrix> {
    spec.validate()?;
    scale_to_degree(graphon_kernel_matrix(spec)?, spec.target_degree)
}

/// Block of each node: equal sizes, the last block absorbing the remainder.
pub fn block_labels(n: usize, blocks: usize) -> Result<Vec<usize>> {
    if blocks == 0 || n < blocks {
        return Err(Error::domain(format!("cannot split {n} nodes into {blocks} blocks")));
    }
    let size = n / blocks;
    Ok((0..n).map(|i| (i / size).min(blocks - 1)).collect())
}

pub fn sbm_matrix(spec: &ModelSpec) -> Result<ProbMatrix> {
    spec.validate()?;
    let b = spec.block_matrix.clone().unwrap_or_else(default_block_matrix);
    let k = b.len();
    for (a, row) in b.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Dimension { expected: k, got: row.len() });
        }
        for (c, &x) in row.iter().enumerate() {
            if x != b[c][a] {
                return Err(Error::domain("block matrix must be symmetric"));
            }
        }
    }
    let labels = block_labels(spec.n, k)?;
    let kernel = ProbMatrix::from_fn(spec.n, |i, j| b[labels[i]][labels[j]]);
    scale_to_degree(kernel, spec.target_degree)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard normal latents, `n` rows of width `d`, column-centered.
pub fn centered_latents(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(derive_seed(seed, "latents", 0));
    let mut z: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    for c in 0..d {
        let mean = (0..n).map(|i| z[i * d + c]).sum::<f64>() / n as f64;
        (0..n).for_each(|i| z[i * d + c] -= mean);
    }
    z
}

/// `logistic(2a + <Z_i, Z_j>)` for given row-major latents, with the common
/// intercept `a` matched to the target degree.
pub fn lsm_matrix_from_latents(n: usize, d: usize, latents: &[f64], target: f64) -> Result<ProbMatrix> {
    if latents.len() != n * d {
        return Err(Error::Dimension { expected: n * d, got: latents.len() });
    }
    let gram = ProbMatrix::from_fn(n, |i, j| {
        (0..d).map(|c| latents[i * d + c] * latents[j * d + c]).sum::<f64>()
    });
    let degree = |a: f64| degree_of(gram.upper(), n, |q| logistic(2.0 * a + q));
    let (mut lo, mut hi) = (-1.0, 1.0);
    while degree(lo) > target {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(Error::domain(format!("target degree {target} is too small to reach")));
        }
    }
    while degree(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InfeasibleDegree { target, max: degree(hi) });
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        a = 0.5 * (lo + hi);
        let d = degree(a);
        if (d - target).abs() <= 1e-12 * target {
            break;
        }
        if d < target {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let upper = gram.upper().iter().map(|&q| logistic(2.0 * a + q)).collect();
    ProbMatrix::from_upper(n, upper)
}

pub fn lsm_matrix(spec: &ModelSpec) -> Result<ProbMatrix> {
    spec.validate()?;
    if spec.latent_dim == 0 {
        return Err(Error::domain("latent dimension must be at least 1"));
    }
    let z = centered_latents(spec.n, spec.latent_dim, spec.seed);
    lsm_matrix_from_latents(spec.n, spec.latent_dim, &z, spec.target_degree)
}

/// Ground-truth probability matrix for any model kind.
pub fn truth_matrix(spec: &ModelSpec) -> Result<ProbMatrix> {
    match spec.kind {
        ModelKind::Graphon1 | ModelKind::Graphon2 | ModelKind::Graphon3 => graphon_matrix(spec),
        ModelKind::Sbm6 => sbm_matrix(spec),
        ModelKind::Lsm => lsm_matrix(spec),
    }
}

/// Independent Bernoulli draws for every unordered pair, one RNG stream per row.
pub fn sample_adjacency(p: &ProbMatrix, seed: u64) -> Result<Graph> {
    if let Some(bad) = p.upper().iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::domain(format!("probability {bad} is outside [0, 1]")));
    }
    let n = p.n();
    let up = p.upper();
    let rows: Vec<Vec<(usize, usize)>> = (0..n.saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = row_stream(seed, i);
            let base = crate::graph::pair_index(n, i, i + 1);
            (i + 1..n)
                .filter(|&j| {
                    let draw: f64 = rng.random();
                    draw < up[base + j - i - 1]
                })
                .map(|j| (i, j))
                .collect()
        })
        .collect();
    let edges: Vec<(usize, usize)> = rows.into_iter().flatten().collect();
    debug_assert!(edges.len() <= pair_count(n));
    Ok(Graph::from_sorted_unique(n, edges))
}

/// Truth and one sampled adjacency; the sample seed is derived from the model seed.
pub fn simulate(spec: &ModelSpec) -> Result<(ProbMatrix, Graph)> {
    let truth = truth_matrix(spec)?;
    let graph = sample_adjacency(&truth, derive_seed(spec.seed, "adjacency", 0))?;
    Ok((truth, graph))
}
