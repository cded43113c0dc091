//! Simulation benchmarks: generate a truth, sample a graph, fit the catalog
//! once, and score every mixing strategy against the truth.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{median, rel_frob};
use crate::candidates::{build_candidates_with, CandidateOptions};
use crate::error::{Error, Result};
use crate::mixing::{combine, mix_with_stats, GramSummary, HoldoutDesign, HoldoutStats, Strategy};
use crate::rng::derive_seed;
use crate::simulate::{simulate, ModelSpec};
use crate::split::sample_dyad_split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kmax: usize,
    pub p: f64,
    pub strategies: Vec<Strategy>,
    pub reps: usize,
    pub seed: u64,
    /// Record per-repetition wall time. Off by default so reports are reproducible byte for byte.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec) -> Self {
        let seed = model.seed;
        ExperimentConfig { model, kmax: 15, p: 0.1, strategies: Strategy::ALL.to_vec(), reps: 1, seed, timing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub rel_frob: f64,
    pub weights: Vec<f64>,
    pub residual_on_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    /// Relative error of every candidate, in catalog order.
    pub candidate_errors: Vec<f64>,
    pub min_candidate_error: f64,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub strategies: Vec<StrategyOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl RepOutcome {
    pub fn rel_frob(&self, s: Strategy) -> Option<f64> {
        self.strategies.iter().find(|o| o.strategy == s).map(|o| o.rel_frob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyMedian {
    pub strategy: Strategy,
    pub median_rel_frob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub medians: Vec<StrategyMedian>,
    pub median_min_candidate_error: Option<f64>,
    pub reps: Vec<RepOutcome>,
    pub failures: Vec<RepFailure>,
}

pub const CSV_HEADER: &str = "model,n,degree,kmax,p,strategy,rep,rel_frob,min_candidate_error,auc,delta,kappa,wall_ms";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn median(&self, s: Strategy) -> Option<f64> {
        self.medians.iter().find(|m| m.strategy == s).and_then(|m| m.median_rel_frob)
    }

    /// One line per repetition and strategy, without the header.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        for r in &self.reps {
            for s in &r.strategies {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},,{},{},{}",
                    c.model.kind,
                    c.model.n,
                    c.model.target_degree,
                    c.kmax,
                    c.p,
                    s.strategy,
                    r.rep,
                    s.rel_frob,
                    r.min_candidate_error,
                    opt(r.delta),
                    opt(r.kappa),
                    opt(r.wall_ms)
                )?;
            }
        }
        Ok(())
    }
}

/// Model spec of repetition `rep`; each repetition draws its own truth seed.
pub fn rep_model(cfg: &ExperimentConfig, rep: usize) -> ModelSpec {
    ModelSpec { seed: derive_seed(cfg.seed, "model", rep as u64), ..cfg.model.clone() }
}

fn run_rep(cfg: &ExperimentConfig, rep: usize) -> Result<RepOutcome> {
    let started = Instant::now();
    let (truth, graph) = simulate(&rep_model(cfg, rep))?;
    let fit_seed = derive_seed(cfg.seed, "fit", rep as u64);
    let mask = sample_dyad_split(graph.n(), cfg.p, derive_seed(fit_seed, "split", 0))?;
    let opts = CandidateOptions::new(cfg.kmax, derive_seed(fit_seed, "candidates", 0));
    let cands = build_candidates_with(&graph, &mask, &opts)?;
    let candidate_errors = cands.iter().map(|c| rel_frob(&c.estimate, &truth)).collect::<Result<Vec<_>>>()?;
    let min_candidate_error = candidate_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let design = HoldoutDesign::from_graph(&cands, &graph, &mask)?;
    let stats = HoldoutStats::from_design(&design);
    let gram = GramSummary::from_parts(stats.sigma.clone(), stats.b.clone()).ok();
    let mut strategies = Vec::with_capacity(cfg.strategies.len());
    for &s in &cfg.strategies {
        let mixed = mix_with_stats(&cands, s, &stats)?;
        strategies.push(StrategyOutcome {
            strategy: s,
            rel_frob: rel_frob(&combine(&cands, &mixed.weights)?, &truth)?,
            residual_on_omega: design.residual(&mixed.weights),
            weights: mixed.weights,
        });
    }
    Ok(RepOutcome {
        rep,
        candidate_errors,
        min_candidate_error,
        delta: gram.as_ref().map(|g| g.delta),
        kappa: gram.as_ref().map(|g| g.kappa),
        strategies,
        wall_ms: cfg.timing.then(|| started.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs every repetition (in parallel) and summarizes by medians. A failed
/// repetition is recorded and left out of the medians.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::domain("at least one strategy is required"));
    }
    let results: Vec<Result<RepOutcome>> = (0..cfg.reps).into_par_iter().map(|rep| run_rep(cfg, rep)).collect();
    let mut reps = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => reps.push(o),
            Err(e) => {
                log::warn!("repetition {rep} failed: {e}");
                failures.push(RepFailure { rep, error: e.to_string() });
            }
        }
    }
    let medians = cfg
        .strategies
        .iter()
        .map(|&s| StrategyMedian {
            strategy: s,
            median_rel_frob: median(&reps.iter().filter_map(|r| r.rel_frob(s)).collect::<Vec<_>>()),
        })
        .collect();
    let median_min_candidate_error = median(&reps.iter().map(|r| r.min_candidate_error).collect::<Vec<_>>());
    Ok(ExperimentReport { config: cfg.clone(), medians, median_min_candidate_error, reps, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Degree(Vec<f64>),
    Kmax(Vec<usize>),
    Holdout(Vec<f64>),
    N(Vec<usize>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Degree(v) | SweepAxis::Holdout(v) => v.len(),
            SweepAxis::Kmax(v) | SweepAxis::N(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, base: &ExperimentConfig, i: usize) -> ExperimentConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::Degree(v) => c.model.target_degree = v[i],
            SweepAxis::Kmax(v) => c.kmax = v[i],
            SweepAxis::Holdout(v) => c.p = v[i],
            SweepAxis::N(v) => c.model.n = v[i],
        }
        c
    }
}

/// One report per value on the axis, all sharing the base seed.
pub fn run_sweep(base: &ExperimentConfig, axis: &SweepAxis) -> Result<Vec<ExperimentReport>> {
    (0..axis.len()).map(|i| run_experiment(&axis.apply(base, i))).collect()
}
