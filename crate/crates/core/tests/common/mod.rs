//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Brute-force NNLS in Gram form: solve the unconstrained problem on every
/// support, keep the nonnegative solutions, return the one with the smallest
/// objective `pi' S pi - 2 b' pi`.
pub fn enumerate_nnls(sigma: &DMatrix<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let m = b.len();
    let mut best = (vec![0.0; m], 0.0);
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|r| mask & (1 << r) != 0).collect();
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |i, j| sigma[(support[i], support[j])]);
        let rhs = DVector::from_iterator(k, support.iter().map(|&r| b[r]));
        let Some(z) = sub.lu().solve(&rhs) else { continue };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut pi = vec![0.0; m];
        for (&r, &v) in support.iter().zip(z.iter()) {
            pi[r] = v;
        }
        let obj = objective(sigma, b, &pi);
        if obj < best.1 {
            best = (pi, obj);
        }
    }
    best
}

pub fn objective(sigma: &DMatrix<f64>, b: &[f64], pi: &[f64]) -> f64 {
    let p = DVector::from_column_slice(pi);
    (p.transpose() * sigma * &p)[(0, 0)] - 2.0 * p.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Gram matrix `X'X` of an `rows x m` matrix with entries in `(0.05, 1)`,
/// so every entry is positive.
pub fn random_positive_gram<R: Rng>(rng: &mut R, rows: usize, m: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(rows, m, |_, _| rng.random_range(0.05..1.0));
    x.transpose() * x
}

/// Pair counts `(wins, ties, positives, negatives)` by visiting every
/// positive-negative pair.
pub fn exhaustive_auc_counts(scores: &[f64], labels: &[bool]) -> (u64, u64, u64, u64) {
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    let (mut wins, mut ties) = (0u64, 0u64);
    for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l) {
        for (j, _) in labels.iter().enumerate().filter(|(_, &l)| !l) {
            if scores[i] > scores[j] {
                wins += 1;
            } else if scores[i] == scores[j] {
                ties += 1;
            }
        }
    }
    (wins, ties, pos, neg)
}

/// Mann-Whitney AUC with ties counted half; `None` for a single class.
pub fn exhaustive_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (wins, ties, pos, neg) = exhaustive_auc_counts(scores, labels);
    (pos > 0 && neg > 0).then(|| (wins as f64 + 0.5 * ties as f64) / (pos as f64 * neg as f64))
}
