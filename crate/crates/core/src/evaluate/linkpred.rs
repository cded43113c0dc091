//! Link prediction: hide a random sample of dyads, fit on the rest, and
//! rank the hidden dyads by the estimated probabilities.

use rand::seq::index;
use serde::Serialize;

use super::metrics::auc;
use crate::error::{Error, Result};
use crate::graph::{pair_count, pair_from_index, Graph};
use crate::mixing::{MixResult, Strategy};
use crate::pipeline::{estimate, PipelineConfig};
use crate::rng::seeded;
use crate::split::{train_adjacency, DyadMask};

pub const DEFAULT_TEST_CAP: usize = 20_000;

#[derive(Debug, Clone)]
pub struct LinkPredSplit {
    /// Test dyads `(i, j)`, `i < j`, ascending.
    pub test_pairs: Vec<(usize, usize)>,
    pub labels: Vec<bool>,
    /// The input graph with every test dyad removed.
    pub train_graph: Graph,
}

/// Number of test dyads drawn: `min(cap, round(frac * n (n - 1) / 2))`.
pub fn test_size(n: usize, frac: f64, cap: usize) -> usize {
    ((frac * pair_count(n) as f64).round() as usize).min(cap)
}

pub fn linkpred_split(g: &Graph, frac: f64, cap: usize, seed: u64) -> Result<LinkPredSplit> {
    let n = g.n();
    if n < 2 {
        return Err(Error::domain("link prediction needs at least 2 nodes"));
    }
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::domain(format!("test fraction {frac} is outside (0, 1)")));
    }
    let total = pair_count(n);
    let mut picked = index::sample(&mut seeded(seed), total, test_size(n, frac, cap)).into_vec();
    picked.sort_unstable();
    let test_pairs: Vec<(usize, usize)> = picked.iter().map(|&k| pair_from_index(n, k)).collect();
    let labels = test_pairs.iter().map(|&(i, j)| g.has_edge(i, j)).collect();
    let mask = DyadMask::from_pairs(n, frac, seed, test_pairs.iter().copied())?;
    let train_graph = train_adjacency(g, &mask)?;
    Ok(LinkPredSplit { test_pairs, labels, train_graph })
}

#[derive(Debug, Clone)]
pub struct LinkPredScores {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub mix: MixResult,
}

impl LinkPredScores {
    /// `None` when the test set holds a single class.
    pub fn auc(&self) -> Option<f64> {
        auc(&self.scores, &self.labels).ok()
    }
}

/// Fits the pipeline on the training graph (with its own internal hold-out
/// split) and scores each test dyad by the combined estimate.
pub fn linkpred_scores(split: &LinkPredSplit, kmax: usize, p: f64, strategy: Strategy, seed: u64) -> Result<LinkPredScores> {
    linkpred_scores_with(split, &PipelineConfig::new(kmax, p, strategy, seed))
}

pub fn linkpred_scores_with(split: &LinkPredSplit, cfg: &PipelineConfig) -> Result<LinkPredScores> {
    let out = estimate(&split.train_graph, cfg)?;
    let scores = split.test_pairs.iter().map(|&(i, j)| out.estimate.get(i, j)).collect();
    Ok(LinkPredScores { scores, labels: split.labels.clone(), mix: out.mix })
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkPredRow {
    pub rep: usize,
    pub strategy: Strategy,
    pub auc: Option<f64>,
    pub test_pairs: usize,
    pub positives: usize,
}
