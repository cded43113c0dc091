//! Hold-out design matrices and the Gram diagnostics built on them.
//!
//! Inner products over the hold-out set count every dyad twice, matching the
//! symmetric Frobenius norm. The factor is uniform, so it changes no weights.

use nalgebra::DMatrix;
use serde::Serialize;

use super::nnls::{nnls_gram, NnlsOptions, NnlsSolution};
use crate::candidates::CandidateEstimate;
use crate::error::{Error, Result};
use crate::graph::{Graph, ProbMatrix};
use crate::split::DyadMask;

/// Candidate values and a target on the hold-out dyads, one column per candidate.
#[derive(Debug, Clone)]
pub struct HoldoutDesign {
    pub target: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

fn check_dims(cands: &[CandidateEstimate], n: usize, mask: &DyadMask) -> Result<()> {
    if cands.is_empty() {
        return Err(Error::domain("at least one candidate is required"));
    }
    if mask.n() != n {
        return Err(Error::Dimension { expected: n, got: mask.n() });
    }
    for c in cands {
        if c.estimate.n() != n {
            return Err(Error::Dimension { expected: n, got: c.estimate.n() });
        }
    }
    Ok(())
}

impl HoldoutDesign {
    /// Targets are the observed adjacency entries on the mask.
    pub fn from_graph(cands: &[CandidateEstimate], g: &Graph, mask: &DyadMask) -> Result<Self> {
        check_dims(cands, g.n(), mask)?;
        let target = mask.pairs().map(|(i, j)| if g.has_edge(i, j) { 1.0 } else { 0.0 }).collect();
        Ok(Self::with_target(cands, mask, target))
    }

    /// Targets are the entries of a known probability matrix on the mask.
    pub fn from_truth(cands: &[CandidateEstimate], truth: &ProbMatrix, mask: &DyadMask) -> Result<Self> {
        check_dims(cands, truth.n(), mask)?;
        let target = mask.indices().iter().map(|&k| truth.upper()[k]).collect();
        Ok(Self::with_target(cands, mask, target))
    }

    fn with_target(cands: &[CandidateEstimate], mask: &DyadMask, target: Vec<f64>) -> Self {
        let columns = cands
            .iter()
            .map(|c| {
                let up = c.estimate.upper();
                mask.indices().iter().map(|&k| up[k]).collect()
            })
            .collect();
        HoldoutDesign { target, columns }
    }

    pub fn candidates(&self) -> usize {
        self.columns.len()
    }

    /// Squared Frobenius distance from each candidate to the target on the mask.
    pub fn validation_errors(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| 2.0 * c.iter().zip(&self.target).map(|(x, t)| (t - x) * (t - x)).sum::<f64>())
            .collect()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.columns.len();
        let mut s = DMatrix::zeros(m, m);
        for r in 0..m {
            for q in r..m {
                let v = 2.0 * dot(&self.columns[r], &self.columns[q]);
                s[(r, q)] = v;
                s[(q, r)] = v;
            }
        }
        s
    }

    pub fn target_products(&self) -> Vec<f64> {
        self.columns.iter().map(|c| 2.0 * dot(c, &self.target)).collect()
    }

    pub fn target_norm_sq(&self) -> f64 {
        2.0 * dot(&self.target, &self.target)
    }

    /// `sum_r w_r * column_r`, before any clipping.
    pub fn fitted(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.target.len()];
        for (c, &w) in self.columns.iter().zip(weights) {
            if w != 0.0 {
                out.iter_mut().zip(c).for_each(|(o, x)| *o += w * x);
            }
        }
        out
    }

    /// Squared Frobenius residual of the unclipped combination on the mask.
    pub fn residual(&self, weights: &[f64]) -> f64 {
        2.0 * self.fitted(weights).iter().zip(&self.target).map(|(f, t)| (t - f) * (t - f)).sum::<f64>()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A partition of the candidates with the constant it certifies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionCertificate {
    pub groups: Vec<Vec<usize>>,
    /// Smallest within-group cosine.
    pub kappa_prime: f64,
    /// `kappa_prime / groups.len()`, a lower bound on `kappa`.
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct GramSummary {
    pub sigma: DMatrix<f64>,
    pub b: Vec<f64>,
    /// Minimum pairwise cosine among candidates that are nonzero on the mask.
    pub delta: f64,
    /// Self-regularizing constant of the norm-equalized Gram matrix.
    pub kappa: f64,
    /// Same quantity for the raw Gram matrix, for reference.
    pub kappa_raw: f64,
    /// Frank-Wolfe duality gap at termination for `kappa`.
    pub kappa_gap: f64,
    /// Candidates with zero norm on the mask; excluded from `delta` and `kappa`.
    pub zero_candidates: Vec<usize>,
    pub partition_certificate: Option<PartitionCertificate>,
}

pub fn gram_summary(cands: &[CandidateEstimate], g: &Graph, mask: &DyadMask) -> Result<GramSummary> {
    let d = HoldoutDesign::from_graph(cands, g, mask)?;
    GramSummary::from_parts(d.gram(), d.target_products())
}

impl GramSummary {
    pub fn from_parts(sigma: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let m = sigma.nrows();
        if sigma.ncols() != m || b.len() != m {
            return Err(Error::Dimension { expected: m, got: b.len() });
        }
        let zero_candidates: Vec<usize> = (0..m).filter(|&r| sigma[(r, r)] <= 0.0).collect();
        if zero_candidates.len() == m {
            return Err(Error::DegenerateGram);
        }
        if !zero_candidates.is_empty() {
            log::warn!("candidates {zero_candidates:?} are zero on the hold-out set");
        }
        let (cos, _) = cosine_matrix(&sigma);
        let delta = min_offdiag(&cos);
        let kappa_fit = simplex_quadratic_min(&cos, FwOptions::default());
        let top = sigma.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let kappa_raw = simplex_quadratic_min(&sigma, FwOptions::default()).value / top;
        let partition_certificate = best_certificate(&cos);
        Ok(GramSummary {
            sigma,
            b,
            delta,
            kappa: kappa_fit.value,
            kappa_raw,
            kappa_gap: kappa_fit.gap,
            zero_candidates,
            partition_certificate,
        })
    }
}

/// Cosine matrix over the candidates with positive norm, and their indices.
pub fn cosine_matrix(sigma: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let kept: Vec<usize> = (0..sigma.nrows()).filter(|&r| sigma[(r, r)] > 0.0).collect();
    let k = kept.len();
    let c = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            let (r, s) = (kept[i], kept[j]);
            (sigma[(r, s)] / (sigma[(r, r)].sqrt() * sigma[(s, s)].sqrt())).clamp(-1.0, 1.0)
        }
    });
    (c, kept)
}

fn min_offdiag(c: &DMatrix<f64>) -> f64 {
    let k = c.nrows();
    let mut d: f64 = 1.0;
    for i in 0..k {
        for j in i + 1..k {
            d = d.min(c[(i, j)]);
        }
    }
    d
}

#[derive(Debug, Clone, Copy)]
pub struct FwOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { max_iter: 5000, gap_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMin {
    pub beta: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimizes `beta' Q beta` over the probability simplex with away-step
/// Frank-Wolfe, starting at the uniform point. `value` is attained at the
/// returned feasible `beta`, so it never undershoots the true minimum.
pub fn simplex_quadratic_min(q: &DMatrix<f64>, opts: FwOptions) -> SimplexMin {
    let m = q.nrows();
    if m == 0 {
        return SimplexMin { beta: Vec::new(), value: 0.0, gap: 0.0, iterations: 0 };
    }
    let mut beta = vec![1.0 / m as f64; m];
    let mut qb: Vec<f64> = (0..m).map(|r| (0..m).map(|s| q[(r, s)] * beta[s]).sum()).collect();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        // Gradient is 2 Q beta; work with Q beta and scale where needed.
        let cur: f64 = dot(&beta, &qb);
        let toward = argmin(&qb);
        gap = 2.0 * (cur - qb[toward]);
        if gap <= opts.gap_tol {
            break;
        }
        let away = (0..m)
            .filter(|&r| beta[r] > 0.0)
            .max_by(|&a, &c| qb[a].total_cmp(&qb[c]).then(c.cmp(&a)))
            .unwrap_or(toward);
        let away_gain = qb[away] - cur;
        // Direction d = e_toward - beta, or the away direction beta - e_away.
        let (d, max_step) = if cur - qb[toward] >= away_gain || beta[away] >= 1.0 {
            let mut d: Vec<f64> = beta.iter().map(|b| -b).collect();
            d[toward] += 1.0;
            (d, 1.0)
        } else {
            let mut d = beta.clone();
            d[away] -= 1.0;
            let a = beta[away];
            (d, a / (1.0 - a))
        };
        let qd: Vec<f64> = (0..m).map(|r| (0..m).map(|s| q[(r, s)] * d[s]).sum()).collect();
        let curv = dot(&d, &qd);
        let slope = dot(&qb, &d);
        let step = if curv > 0.0 { (-slope / curv).clamp(0.0, max_step) } else { max_step };
        if step <= 0.0 {
            break;
        }
        for r in 0..m {
            beta[r] = (beta[r] + step * d[r]).max(0.0);
            qb[r] += step * qd[r];
        }
        if step == max_step && max_step < 1.0 {
            beta[away] = 0.0;
        }
        let s: f64 = beta.iter().sum();
        beta.iter_mut().for_each(|b| *b /= s);
        qb = (0..m).map(|r| (0..m).map(|s| q[(r, s)] * beta[s]).sum()).collect();
    }
    let value = dot(&beta, &qb);
    SimplexMin { beta, value, gap, iterations }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Bound certified by a partition of the rows of a cosine matrix `c`
/// (indices refer to rows of `c`). Returns `None` when the certificate does
/// not apply: a negative cosine anywhere, a non-positive within-group
/// cosine, or groups that do not partition the index set.
pub fn partition_bound(c: &DMatrix<f64>, groups: &[Vec<usize>]) -> Option<PartitionCertificate> {
    let m = c.nrows();
    let mut seen = vec![false; m];
    for g in groups {
        if g.is_empty() {
            return None;
        }
        for &r in g {
            if r >= m || std::mem::replace(&mut seen[r], true) {
                return None;
            }
        }
    }
    if seen.iter().any(|s| !s) || c.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut kappa_prime: f64 = 1.0;
    for g in groups {
        let norm_max = g.iter().map(|&r| c[(r, r)]).fold(0.0f64, f64::max);
        for &r in g {
            for &s in g {
                kappa_prime = kappa_prime.min(c[(r, s)] / norm_max);
            }
        }
    }
    if kappa_prime <= 0.0 {
        return None;
    }
    Some(PartitionCertificate { groups: groups.to_vec(), kappa_prime, bound: kappa_prime / groups.len() as f64 })
}

/// Greedy threshold partitions: each candidate joins the first group whose
/// members all have cosine at least `tau` with it.
fn greedy_partition(c: &DMatrix<f64>, tau: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for r in 0..c.nrows() {
        match groups.iter_mut().find(|g| g.iter().all(|&s| c[(r, s)] >= tau)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
}

/// Best certificate among the whole set, the singletons, and greedy
/// threshold partitions at a spread of cosine levels.
pub fn best_certificate(c: &DMatrix<f64>) -> Option<PartitionCertificate> {
    let m = c.nrows();
    if m == 0 {
        return None;
    }
    let mut candidates = vec![vec![(0..m).collect::<Vec<_>>()], (0..m).map(|r| vec![r]).collect()];
    for step in 1..20 {
        candidates.push(greedy_partition(c, step as f64 / 20.0));
    }
    candidates
        .iter()
        .filter_map(|g| partition_bound(c, g))
        .max_by(|a, b| a.bound.total_cmp(&b.bound).then(b.groups.len().cmp(&a.groups.len())))
}

#[derive(Debug, Clone)]
pub struct OracleProjection {
    pub weights: Vec<f64>,
    /// Frobenius (not squared) distance from the truth to its projection on the mask.
    pub error: f64,
    pub solution: NnlsSolution,
}

/// Projects the true probabilities on the mask onto the cone spanned by the candidates.
pub fn oracle_cone_projection(
    cands: &[CandidateEstimate],
    truth: &ProbMatrix,
    mask: &DyadMask,
) -> Result<OracleProjection> {
    let d = HoldoutDesign::from_truth(cands, truth, mask)?;
    let solution = nnls_gram(&d.gram(), &d.target_products(), NnlsOptions::default());
    let error = d.residual(&solution.weights).max(0.0).sqrt();
    Ok(OracleProjection { weights: solution.weights.clone(), error, solution })
}
