//! The candidate catalog: block-model fits at every `k` up to `kmax` plus a
//! low-rank (USVT) reconstruction, all fitted on the training adjacency and
//! rescaled by `1 / (1 - p)`.
//!
//! All fits share one eigendecomposition of the training adjacency.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ProbMatrix};
use crate::linalg::{kmeans, leading_eigen_dense, leading_eigen_with, nearest, EigenBackend, KMeansConfig};
use crate::rng::derive_seed;
use crate::split::{train_adjacency, DyadMask};

pub use crate::linalg::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sbm,
    Dcbm,
    Usvt,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Sbm => "sbm",
            Family::Dcbm => "dcbm",
            Family::Usvt => "usvt",
        })
    }
}

/// One fitted estimate of the probability matrix and where it came from.
#[derive(Debug, Clone)]
pub struct CandidateEstimate {
    pub estimate: ProbMatrix,
    pub family: Family,
    /// Block count for SBM/DCBM, retained rank for USVT.
    pub k: usize,
    pub fit_seed: u64,
    /// Hold-out probability used for the `1 / (1 - p)` rescale.
    pub rescale_p: f64,
}

impl CandidateEstimate {
    pub fn manifest(&self) -> CandidateManifest {
        CandidateManifest { family: self.family, k: self.k, seed: self.fit_seed, rescale_p: self.rescale_p }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.family, self.k)
    }
}

/// JSON manifest written next to an exported candidate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateManifest {
    pub family: Family,
    pub k: usize,
    pub seed: u64,
    pub rescale_p: f64,
}

fn check_rescale(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("rescale probability {p} is outside [0, 1)")));
    }
    Ok(1.0 / (1.0 - p))
}

fn check_cluster_k(basis: &SpectralBasis, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("number of clusters must be at least 1"));
    }
    if k > basis.len() {
        return Err(Error::domain(format!("k = {k} exceeds the {} available eigenvectors", basis.len())));
    }
    Ok(())
}

fn leading_rows(basis: &SpectralBasis, k: usize) -> Vec<f64> {
    let n = basis.n();
    let mut rows = Vec::with_capacity(n * k);
    for i in 0..n {
        for l in 0..k {
            rows.push(basis.vectors[(i, l)]);
        }
    }
    rows
}

/// k-means on the rows of the first `k` eigenvectors.
pub fn spectral_clustering(basis: &SpectralBasis, k: usize, seed: u64) -> Result<Vec<usize>> {
    spectral_clustering_with(basis, k, seed, KMeansConfig::default())
}

pub fn spectral_clustering_with(basis: &SpectralBasis, k: usize, seed: u64, cfg: KMeansConfig) -> Result<Vec<usize>> {
    check_cluster_k(basis, k)?;
    Ok(kmeans(&leading_rows(basis, k), k, k, seed, cfg).labels)
}

/// Rows below this norm count as zero rows for spherical normalization.
const ZERO_ROW: f64 = 1e-10;

/// k-means on the unit-normalized rows of the first `k` eigenvectors.
///
/// Zero rows (typically isolated nodes) are clustered separately: each goes
/// to the cluster whose centroid of raw, unnormalized rows is nearest.
pub fn spherical_spectral_clustering(basis: &SpectralBasis, k: usize, seed: u64) -> Result<Vec<usize>> {
    spherical_spectral_clustering_with(basis, k, seed, KMeansConfig::default())
}

pub fn spherical_spectral_clustering_with(
    basis: &SpectralBasis,
    k: usize,
    seed: u64,
    cfg: KMeansConfig,
) -> Result<Vec<usize>> {
    check_cluster_k(basis, k)?;
    let n = basis.n();
    let raw = leading_rows(basis, k);
    let mut nonzero = Vec::with_capacity(n);
    let mut normalized = Vec::with_capacity(n * k);
    for (i, row) in raw.chunks(k).enumerate() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > ZERO_ROW {
            nonzero.push(i);
            normalized.extend(row.iter().map(|x| x / norm));
        }
    }
    if nonzero.len() < k {
        // Too few usable rows: cluster everything, zero rows at the origin.
        let all: Vec<f64> = raw
            .chunks(k)
            .flat_map(|row| {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                row.iter().map(move |x| if norm > ZERO_ROW { x / norm } else { 0.0 })
            })
            .collect();
        return Ok(kmeans(&all, k, k, seed, cfg).labels);
    }
    let sub = kmeans(&normalized, k, k, seed, cfg).labels;
    if nonzero.len() == n {
        return Ok(sub);
    }
    let mut labels = vec![usize::MAX; n];
    let mut sums = vec![vec![0.0; k]; k];
    let mut counts = vec![0usize; k];
    for (&i, &l) in nonzero.iter().zip(&sub) {
        labels[i] = l;
        counts[l] += 1;
        sums[l].iter_mut().zip(&raw[i * k..(i + 1) * k]).for_each(|(s, x)| *s += x);
    }
    let raw_centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|x| x / c.max(1) as f64).collect())
        .collect();
    for (i, l) in labels.iter_mut().enumerate() {
        if *l == usize::MAX {
            *l = nearest(&raw[i * k..(i + 1) * k], &raw_centroids).0;
        }
    }
    Ok(labels)
}

fn block_count(labels: &[usize], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, got: labels.len() });
    }
    Ok(labels.iter().max().map_or(1, |m| m + 1))
}

/// Sum of `A_ij` over ordered pairs with labels `(s, t)`; within-block edges count twice.
fn block_edge_totals(g: &Graph, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut totals = DMatrix::zeros(k, k);
    for &(i, j) in g.edges() {
        let (s, t) = (labels[i], labels[j]);
        totals[(s, t)] += 1.0;
        totals[(t, s)] += 1.0;
    }
    totals
}

/// Stochastic block model fit for fixed labels: block means over all
/// off-diagonal pairs (held-out pairs count as zeros), rescaled and clipped.
/// A block with no pairs (a singleton's diagonal block) gets probability 0.
pub fn sbm_estimate(g: &Graph, labels: &[usize], p: f64) -> Result<CandidateEstimate> {
    let scale = check_rescale(p)?;
    let n = g.n();
    let k = block_count(labels, n)?;
    let totals = block_edge_totals(g, labels, k);
    let mut sizes = vec![0f64; k];
    for &l in labels {
        sizes[l] += 1.0;
    }
    let means = DMatrix::from_fn(k, k, |s, t| {
        let pairs = if s == t { sizes[s] * (sizes[s] - 1.0) } else { sizes[s] * sizes[t] };
        if pairs > 0.0 {
            totals[(s, t)] / pairs
        } else {
            0.0
        }
    });
    let estimate = ProbMatrix::from_fn(n, |i, j| (means[(labels[i], labels[j])] * scale).clamp(0.0, 1.0));
    Ok(CandidateEstimate { estimate, family: Family::Sbm, k, fit_seed: 0, rescale_p: p })
}

/// Degree-corrected block model fit for fixed labels:
/// `P_ij = theta_i theta_j O_{c_i c_j} / (1 - p)` with `theta_i = d_i / sum_{c_j = c_i} d_j`.
/// Zero-degree nodes get `theta_i = 0`.
pub fn dcbm_estimate(g: &Graph, labels: &[usize], p: f64) -> Result<CandidateEstimate> {
    let scale = check_rescale(p)?;
    let n = g.n();
    let k = block_count(labels, n)?;
    let totals = block_edge_totals(g, labels, k);
    let degrees = g.degrees();
    let mut block_degree = vec![0f64; k];
    for (d, &l) in degrees.iter().zip(labels) {
        block_degree[l] += *d as f64;
    }
    let theta: Vec<f64> = degrees
        .iter()
        .zip(labels)
        .map(|(&d, &l)| if d == 0 { 0.0 } else { d as f64 / block_degree[l] })
        .collect();
    let estimate = ProbMatrix::from_fn(n, |i, j| {
        (theta[i] * theta[j] * totals[(labels[i], labels[j])] * scale).clamp(0.0, 1.0)
    });
    Ok(CandidateEstimate { estimate, family: Family::Dcbm, k, fit_seed: 0, rescale_p: p })
}

/// Smallest `r` with `r^3 >= n`, i.e. `ceil(n^(1/3))` without rounding error.
pub fn default_usvt_rank(n: usize) -> usize {
    let mut r = (n as f64).cbrt().floor() as usize;
    while r * r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r.max(1)
}

/// Rank-`rank` spectral reconstruction from a precomputed basis, rescaled and clipped.
pub fn usvt_from_basis(basis: &SpectralBasis, rank: usize, p: f64) -> Result<ProbMatrix> {
    let scale = check_rescale(p)?;
    if rank == 0 || rank > basis.len() {
        return Err(Error::domain(format!("USVT rank {rank} outside 1..={}", basis.len())));
    }
    let recon = basis.reconstruct(rank);
    // Symmetrize explicitly; the reconstruction is symmetric up to rounding.
    Ok(ProbMatrix::from_fn(basis.n(), |i, j| {
        (0.5 * (recon[(i, j)] + recon[(j, i)]) * scale).clamp(0.0, 1.0)
    }))
}

/// USVT on an arbitrary symmetric matrix (the diagonal of the result is dropped).
pub fn usvt_matrix(a: &DMatrix<f64>, rank: usize, p: f64) -> Result<ProbMatrix> {
    check_rescale(p)?;
    let basis = leading_eigen_dense(a, rank.max(1).min(a.nrows().max(1)))?;
    usvt_from_basis(&basis, rank, p)
}

/// USVT on the adjacency matrix of `g`.
pub fn usvt_estimate(g: &Graph, rank: usize, p: f64) -> Result<CandidateEstimate> {
    if rank == 0 || rank > g.n() {
        return Err(Error::domain(format!("USVT rank {rank} outside 1..={}", g.n())));
    }
    let basis = leading_eigen_with(g, rank, EigenBackend::Auto)?;
    let estimate = usvt_from_basis(&basis, rank, p)?;
    Ok(CandidateEstimate { estimate, family: Family::Usvt, k: rank, fit_seed: 0, rescale_p: p })
}

/// Knobs for [`build_candidates_with`].
#[derive(Debug, Clone)]
pub struct CandidateOptions {
    pub kmax: usize,
    pub seed: u64,
    /// Defaults to `ceil(n^(1/3))`.
    pub usvt_rank: Option<usize>,
    pub backend: EigenBackend,
    pub kmeans: KMeansConfig,
}

impl CandidateOptions {
    pub fn new(kmax: usize, seed: u64) -> Self {
        CandidateOptions { kmax, seed, usvt_rank: None, backend: EigenBackend::Auto, kmeans: KMeansConfig::default() }
    }
}

/// Fits SBM and DCBM for `k = 1..=kmax` and USVT on `A(Omega^c)`.
///
/// Output order is SBM k = 1..kmax, DCBM k = 1..kmax, USVT; `2 kmax + 1` in total.
pub fn build_candidates(g: &Graph, mask: &DyadMask, kmax: usize, seed: u64) -> Result<Vec<CandidateEstimate>> {
    build_candidates_with(g, mask, &CandidateOptions::new(kmax, seed))
}

pub fn build_candidates_with(g: &Graph, mask: &DyadMask, opts: &CandidateOptions) -> Result<Vec<CandidateEstimate>> {
    let train = train_adjacency(g, mask)?;
    fit_candidates(&train, mask.p(), opts)
}

/// Fits the catalog on an already-masked training graph.
pub fn fit_candidates(train: &Graph, p: f64, opts: &CandidateOptions) -> Result<Vec<CandidateEstimate>> {
    check_rescale(p)?;
    let n = train.n();
    if opts.kmax == 0 || opts.kmax > n {
        return Err(Error::domain(format!("kmax = {} outside 1..={n}", opts.kmax)));
    }
    let rank = opts.usvt_rank.unwrap_or_else(|| default_usvt_rank(n));
    if rank == 0 || rank > n {
        return Err(Error::domain(format!("USVT rank {rank} outside 1..={n}")));
    }
    let basis = leading_eigen_with(train, opts.kmax.max(rank), opts.backend)?;

    let mut jobs: Vec<(Family, usize)> = Vec::with_capacity(2 * opts.kmax + 1);
    jobs.extend((1..=opts.kmax).map(|k| (Family::Sbm, k)));
    jobs.extend((1..=opts.kmax).map(|k| (Family::Dcbm, k)));
    jobs.push((Family::Usvt, rank));

    jobs.into_par_iter()
        .map(|(family, k)| {
            let fit_seed = derive_seed(opts.seed, &family.to_string(), k as u64);
            let mut cand = match family {
                Family::Sbm => {
                    let labels = spectral_clustering_with(&basis, k, fit_seed, opts.kmeans)?;
                    sbm_estimate(train, &labels, p)?
                }
                Family::Dcbm => {
                    let labels = spherical_spectral_clustering_with(&basis, k, fit_seed, opts.kmeans)?;
                    dcbm_estimate(train, &labels, p)?
                }
                Family::Usvt => CandidateEstimate {
                    estimate: usvt_from_basis(&basis, k, p)?,
                    family,
                    k,
                    fit_seed,
                    rescale_p: p,
                },
            };
            cand.k = k;
            cand.fit_seed = fit_seed;
            Ok(cand)
        })
        .collect()
}
