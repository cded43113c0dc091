use crate::error::{Error, Result};
use crate::graph::ProbMatrix;

/// `|est - truth|_F^2 / |truth|_F^2` over the off-diagonal entries.
pub fn rel_frob(est: &ProbMatrix, truth: &ProbMatrix) -> Result<f64> {
    if est.n() != truth.n() {
        return Err(Error::Dimension { expected: truth.n(), got: est.n() });
    }
    let denom: f64 = truth.upper().iter().map(|x| x * x).sum();
    if denom == 0.0 {
        return Err(Error::domain("relative error is undefined for an all-zero truth"));
    }
    let num: f64 = est.upper().iter().zip(truth.upper()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// Exact pair counts behind the Mann-Whitney statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AucCounts {
    pub positives: u64,
    pub negatives: u64,
    /// Positive-negative pairs with the positive scored strictly higher.
    pub wins: u64,
    pub ties: u64,
}

impl AucCounts {
    pub fn value(&self) -> f64 {
        (self.wins as f64 + 0.5 * self.ties as f64) / (self.positives as f64 * self.negatives as f64)
    }
}

/// Counts wins and ties with one sort instead of all pairs.
pub fn auc_counts(scores: &[f64], labels: &[bool]) -> Result<AucCounts> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: labels.len(), got: scores.len() });
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::domain(format!("score {bad} is not comparable")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut c = AucCounts { positives: 0, negatives: 0, wins: 0, ties: 0 };
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        // -0.0 and 0.0 compare equal as scores.
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        let neg = (end - start) as u64 - pos;
        c.wins += pos * c.negatives;
        c.ties += pos * neg;
        c.positives += pos;
        c.negatives += neg;
        start = end;
    }
    if c.positives == 0 || c.negatives == 0 {
        return Err(Error::UndefinedAuc);
    }
    Ok(c)
}

/// Probability that a random positive outscores a random negative, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(auc_counts(scores, labels)?.value())
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}
