//! Aggregating candidate estimates with the held-out dyads.
//!
//! Four strategies share one set of hold-out statistics: validation errors
//! for selection and exponential weights, the Gram matrix `S` and target
//! products `b` for the least-squares mixers.

pub mod gram;
pub mod nnls;
pub mod ols;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use gram::{
    best_certificate, cosine_matrix, gram_summary, oracle_cone_projection, partition_bound, simplex_quadratic_min,
    FwOptions, GramSummary, HoldoutDesign, OracleProjection, PartitionCertificate, SimplexMin,
};
pub use nnls::{kkt_residual, nnls_gram, NnlsOptions, NnlsSolution};
pub use ols::{ols_mix_gram, pinv_solve};

use crate::candidates::{CandidateEstimate, CandidateManifest};
use crate::error::{Error, Result};
use crate::graph::{Graph, ProbMatrix};
use crate::split::DyadMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ecv,
    Exp,
    Ols,
    Nnl,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Ecv, Strategy::Exp, Strategy::Ols, Strategy::Nnl];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ecv => "ecv",
            Strategy::Exp => "exp",
            Strategy::Ols => "ols",
            Strategy::Nnl => "nnl",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecv" => Ok(Strategy::Ecv),
            "exp" => Ok(Strategy::Exp),
            "ols" => Ok(Strategy::Ols),
            "nnl" | "nnls" => Ok(Strategy::Nnl),
            other => Err(Error::domain(format!("unknown mixing strategy `{other}` (expected ecv, exp, ols or nnl)"))),
        }
    }
}

/// Squared Frobenius distance from each candidate to the observed adjacency on the mask.
pub fn validation_errors(cands: &[CandidateEstimate], g: &Graph, mask: &DyadMask) -> Result<Vec<f64>> {
    Ok(HoldoutDesign::from_graph(cands, g, mask)?.validation_errors())
}

/// Index of the smallest error, lowest index on ties. Panics on an empty slice.
pub fn ecv_select(errors: &[f64]) -> usize {
    assert!(!errors.is_empty(), "ecv_select needs at least one error");
    let mut best = 0;
    for (r, &e) in errors.iter().enumerate().skip(1) {
        if e < errors[best] {
            best = r;
        }
    }
    best
}

/// Softmax of the negated errors, shifted by the minimum for stability.
pub fn exp_mix(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::domain("exp_mix needs at least one error"));
    }
    if let Some(bad) = errors.iter().find(|e| !e.is_finite()) {
        return Err(Error::domain(format!("validation error {bad} is not finite")));
    }
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = errors.iter().map(|e| (-(e - lo)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

pub fn ols_mix(gram: &GramSummary) -> Vec<f64> {
    ols_mix_gram(&gram.sigma, &gram.b)
}

pub fn nnl_mix(gram: &GramSummary) -> Vec<f64> {
    nnls_gram(&gram.sigma, &gram.b, NnlsOptions::default()).weights
}

/// `sum_r w_r * candidate_r` over the full matrix, without clipping.
pub fn combine_raw(cands: &[CandidateEstimate], weights: &[f64]) -> Result<ProbMatrix> {
    if cands.len() != weights.len() {
        return Err(Error::Dimension { expected: cands.len(), got: weights.len() });
    }
    let n = cands.first().map_or(0, |c| c.estimate.n());
    let mut out = ProbMatrix::zeros(n);
    for (c, &w) in cands.iter().zip(weights) {
        if c.estimate.n() != n {
            return Err(Error::Dimension { expected: n, got: c.estimate.n() });
        }
        if w != 0.0 {
            out.upper_mut().iter_mut().zip(c.estimate.upper()).for_each(|(o, x)| *o += w * x);
        }
    }
    Ok(out)
}

/// Weighted combination of the candidates, clipped to [0, 1].
pub fn combine(cands: &[CandidateEstimate], weights: &[f64]) -> Result<ProbMatrix> {
    Ok(combine_raw(cands, weights)?.clip_unit())
}

/// Sufficient statistics for choosing weights: one hold-out split's worth,
/// or the average over several.
#[derive(Debug, Clone)]
pub struct HoldoutStats {
    pub errors: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub b: Vec<f64>,
    pub target_norm_sq: f64,
}

impl HoldoutStats {
    pub fn from_design(d: &HoldoutDesign) -> Self {
        HoldoutStats {
            errors: d.validation_errors(),
            sigma: d.gram(),
            b: d.target_products(),
            target_norm_sq: d.target_norm_sq(),
        }
    }

    /// Entrywise mean of several splits' statistics.
    pub fn average(parts: &[HoldoutStats]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::domain("nothing to average"))?;
        let m = first.errors.len();
        let k = parts.len() as f64;
        let mut out = HoldoutStats {
            errors: vec![0.0; m],
            sigma: DMatrix::zeros(m, m),
            b: vec![0.0; m],
            target_norm_sq: 0.0,
        };
        for p in parts {
            if p.errors.len() != m {
                return Err(Error::Dimension { expected: m, got: p.errors.len() });
            }
            out.errors.iter_mut().zip(&p.errors).for_each(|(o, x)| *o += x / k);
            out.b.iter_mut().zip(&p.b).for_each(|(o, x)| *o += x / k);
            out.sigma += &p.sigma / k;
            out.target_norm_sq += p.target_norm_sq / k;
        }
        Ok(out)
    }

    /// Residual `|target - sum_r w_r column_r|^2` expanded through the Gram matrix.
    pub fn residual(&self, w: &[f64]) -> f64 {
        let m = w.len();
        let mut quad = 0.0;
        for r in 0..m {
            quad += w[r] * ((0..m).map(|s| self.sigma[(r, s)] * w[s]).sum::<f64>() - 2.0 * self.b[r]);
        }
        (self.target_norm_sq + quad).max(0.0)
    }
}

/// Weights from hold-out statistics, plus the NNLS report when relevant.
pub fn choose_weights(strategy: Strategy, stats: &HoldoutStats) -> Result<(Vec<f64>, Option<NnlsSolution>)> {
    let m = stats.errors.len();
    Ok(match strategy {
        Strategy::Ecv => {
            let mut w = vec![0.0; m];
            w[ecv_select(&stats.errors)] = 1.0;
            (w, None)
        }
        Strategy::Exp => (exp_mix(&stats.errors)?, None),
        Strategy::Ols => (ols_mix_gram(&stats.sigma, &stats.b), None),
        Strategy::Nnl => {
            let sol = nnls_gram(&stats.sigma, &stats.b, NnlsOptions::default());
            (sol.weights.clone(), Some(sol))
        }
    })
}

#[derive(Debug, Clone)]
pub struct MixResult {
    pub strategy: Strategy,
    pub weights: Vec<f64>,
    pub validation_errors: Vec<f64>,
    /// Combined estimate over the full matrix, clipped to [0, 1].
    pub estimate: ProbMatrix,
    /// `None` when every candidate vanishes on the mask.
    pub gram: Option<GramSummary>,
    /// Squared Frobenius residual of the unclipped combination on the mask.
    pub residual_on_omega: f64,
    pub nnls: Option<NnlsSolution>,
    pub candidates: Vec<CandidateManifest>,
}

/// Serializable summary of a [`MixResult`].
#[derive(Debug, Clone, Serialize)]
pub struct MixReport {
    pub strategy: Strategy,
    pub weights: Vec<f64>,
    pub validation_errors: Vec<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub residual_on_omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_certificate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnls_kkt_residual: Option<f64>,
    pub candidates: Vec<String>,
}

impl MixResult {
    pub fn report(&self) -> MixReport {
        MixReport {
            strategy: self.strategy,
            weights: self.weights.clone(),
            validation_errors: self.validation_errors.clone(),
            delta: self.gram.as_ref().map(|g| g.delta),
            kappa: self.gram.as_ref().map(|g| g.kappa),
            residual_on_omega: self.residual_on_omega,
            kappa_certificate: self.gram.as_ref().and_then(|g| g.partition_certificate.as_ref()).map(|c| c.bound),
            nnls_kkt_residual: self.nnls.as_ref().map(|s| s.kkt_residual),
            candidates: self.candidates.iter().map(|c| format!("{}:{}", c.family, c.k)).collect(),
        }
    }
}

/// Builds a [`MixResult`] from already-chosen statistics.
pub fn mix_with_stats(cands: &[CandidateEstimate], strategy: Strategy, stats: &HoldoutStats) -> Result<MixResult> {
    if stats.errors.len() != cands.len() {
        return Err(Error::Dimension { expected: cands.len(), got: stats.errors.len() });
    }
    let (weights, nnls) = choose_weights(strategy, stats)?;
    let estimate = combine(cands, &weights)?;
    let gram = match GramSummary::from_parts(stats.sigma.clone(), stats.b.clone()) {
        Ok(g) => Some(g),
        Err(Error::DegenerateGram) => None,
        Err(e) => return Err(e),
    };
    Ok(MixResult {
        strategy,
        residual_on_omega: stats.residual(&weights),
        weights,
        validation_errors: stats.errors.clone(),
        estimate,
        gram,
        nnls,
        candidates: cands.iter().map(|c| c.manifest()).collect(),
    })
}

pub fn mix(cands: &[CandidateEstimate], g: &Graph, mask: &DyadMask, strategy: Strategy) -> Result<MixResult> {
    let design = HoldoutDesign::from_graph(cands, g, mask)?;
    let mut out = mix_with_stats(cands, strategy, &HoldoutStats::from_design(&design))?;
    // Recompute directly from the design to avoid cancellation in the Gram expansion.
    out.residual_on_omega = design.residual(&out.weights);
    Ok(out)
}
