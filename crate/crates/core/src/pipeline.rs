//! End-to-end estimation: split, fit the catalog, learn weights, combine.

use serde::{Deserialize, Serialize};

use crate::candidates::{build_candidates_with, CandidateEstimate, CandidateOptions};
use crate::error::{Error, Result};
use crate::graph::{Graph, ProbMatrix};
use crate::mixing::{combine_raw, mix, mix_with_stats, HoldoutDesign, HoldoutStats, MixResult, Strategy};
use crate::rng::derive_seed;
use crate::split::{sample_dyad_split, DyadMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kmax: usize,
    /// Hold-out probability `p`.
    pub holdout: f64,
    pub strategy: Strategy,
    pub seed: u64,
    /// Independent splits whose hold-out statistics are averaged.
    pub reps: usize,
    /// Also run with the roles of the two halves swapped and stitch the results.
    pub stitch: bool,
    pub usvt_rank: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { kmax: 15, holdout: 0.1, strategy: Strategy::Nnl, seed: 0, reps: 1, stitch: false, usvt_rank: None }
    }
}

impl PipelineConfig {
    pub fn new(kmax: usize, holdout: f64, strategy: Strategy, seed: u64) -> Self {
        PipelineConfig { kmax, holdout, strategy, seed, ..Default::default() }
    }

    /// Catalog options of repetition `rep`.
    pub fn candidate_options(&self, rep: usize) -> CandidateOptions {
        let mut o = CandidateOptions::new(self.kmax, derive_seed(self.seed, "candidates", rep as u64));
        o.usvt_rank = self.usvt_rank;
        o
    }

    /// Hold-out mask of repetition `rep`.
    pub fn mask(&self, n: usize, rep: usize) -> Result<DyadMask> {
        sample_dyad_split(n, self.holdout, derive_seed(self.seed, "split", rep as u64))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Final estimate: the mixed matrix, or the stitched one in stitch mode.
    pub estimate: ProbMatrix,
    pub mix: MixResult,
    /// The swapped-roles run, present in stitch mode.
    pub swapped: Option<MixResult>,
}

pub fn estimate(g: &Graph, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if cfg.reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    if cfg.stitch && cfg.reps > 1 {
        return Err(Error::domain("stitching uses a single split; set reps to 1"));
    }
    let n = g.n();
    if cfg.reps == 1 {
        let mask = cfg.mask(n, 0)?;
        let cands = build_candidates_with(g, &mask, &cfg.candidate_options(0))?;
        let main = mix(&cands, g, &mask, cfg.strategy)?;
        drop(cands);
        if !cfg.stitch {
            return Ok(PipelineOutput { estimate: main.estimate.clone(), mix: main, swapped: None });
        }
        let other = mask.complement();
        let cands = build_candidates_with(g, &other, &cfg.candidate_options(1))?;
        let swapped = mix(&cands, g, &other, cfg.strategy)?;
        let mut stitched = swapped.estimate.clone();
        for &k in mask.indices() {
            stitched.upper_mut()[k] = main.estimate.upper()[k];
        }
        return Ok(PipelineOutput { estimate: stitched, mix: main, swapped: Some(swapped) });
    }

    // Several splits: average the statistics, then apply the shared weights to
    // each split's candidates and average those combinations. Candidates are
    // refitted in the second pass rather than held in memory.
    let fit = |rep: usize| -> Result<(DyadMask, Vec<CandidateEstimate>)> {
        let mask = cfg.mask(n, rep)?;
        let cands = build_candidates_with(g, &mask, &cfg.candidate_options(rep))?;
        Ok((mask, cands))
    };
    let mut stats = Vec::with_capacity(cfg.reps);
    for rep in 0..cfg.reps {
        let (mask, cands) = fit(rep)?;
        stats.push(HoldoutStats::from_design(&HoldoutDesign::from_graph(&cands, g, &mask)?));
    }
    let avg = HoldoutStats::average(&stats)?;
    let mut result: Option<MixResult> = None;
    let mut total = ProbMatrix::zeros(n);
    for rep in 0..cfg.reps {
        let (_, cands) = fit(rep)?;
        if rep == 0 {
            result = Some(mix_with_stats(&cands, cfg.strategy, &avg)?);
        }
        let weights = &result.as_ref().expect("set on the first repetition").weights;
        let part = combine_raw(&cands, weights)?;
        total.upper_mut().iter_mut().zip(part.upper()).for_each(|(t, x)| *t += x / cfg.reps as f64);
    }
    let mut mix = result.expect("reps >= 1");
    mix.estimate = total.clip_unit();
    Ok(PipelineOutput { estimate: mix.estimate.clone(), mix, swapped: None })
}

/// One split and one candidate catalog, mixed with each strategy in turn.
pub fn estimate_each(g: &Graph, cfg: &PipelineConfig, strategies: &[Strategy]) -> Result<Vec<MixResult>> {
    let mask = cfg.mask(g.n(), 0)?;
    let cands = build_candidates_with(g, &mask, &cfg.candidate_options(0))?;
    let design = HoldoutDesign::from_graph(&cands, g, &mask)?;
    let stats = HoldoutStats::from_design(&design);
    strategies
        .iter()
        .map(|&s| {
            let mut r = mix_with_stats(&cands, s, &stats)?;
            r.residual_on_omega = design.residual(&r.weights);
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, ModelKind, ModelSpec};

    fn graph() -> Graph {
        simulate(&ModelSpec::new(ModelKind::Sbm6, 90, 12.0, 5)).unwrap().1
    }

    #[test]
    fn deterministic_and_bounded() {
        let g = graph();
        let cfg = PipelineConfig::new(3, 0.1, Strategy::Nnl, 9);
        let a = estimate(&g, &cfg).unwrap();
        let b = estimate(&g, &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.mix.weights.len(), 7);
        assert!(a.estimate.upper().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn stitch_takes_each_half_from_its_own_run() {
        let g = graph();
        let mut cfg = PipelineConfig::new(2, 0.2, Strategy::Exp, 4);
        cfg.stitch = true;
        let out = estimate(&g, &cfg).unwrap();
        let swapped = out.swapped.as_ref().unwrap();
        let mask = cfg.mask(g.n(), 0).unwrap();
        for k in 0..out.estimate.upper().len() {
            let want = if mask.contains_index(k) { out.mix.estimate.upper()[k] } else { swapped.estimate.upper()[k] };
            assert_eq!(out.estimate.upper()[k], want);
        }
    }

    #[test]
    fn reps_average_statistics() {
        let g = graph();
        let mut cfg = PipelineConfig::new(2, 0.1, Strategy::Ecv, 1);
        cfg.reps = 3;
        let out = estimate(&g, &cfg).unwrap();
        let mut errs = vec![0.0; 5];
        for rep in 0..3 {
            let mask = cfg.mask(g.n(), rep).unwrap();
            let cands = build_candidates_with(&g, &mask, &cfg.candidate_options(rep)).unwrap();
            let e = crate::mixing::validation_errors(&cands, &g, &mask).unwrap();
            errs.iter_mut().zip(e).for_each(|(a, b)| *a += b / 3.0);
        }
        for (a, b) in out.mix.validation_errors.iter().zip(&errs) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(estimate(&g, &PipelineConfig { stitch: true, ..cfg }).is_err());
    }
}
