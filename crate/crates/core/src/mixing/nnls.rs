//! Non-negative least squares in Gram form:
//! minimize `pi' S pi - 2 b' pi` subject to `pi >= 0`.
//!
//! The primary solver is cyclic coordinate descent from `pi = 0`, polished by
//! an exact solve on the support it finds. Each run is certified by its KKT
//! residual; if the sweep budget runs out first, an
//! active-set (Lawson-Hanson) pass finishes the job and the better of the
//! two points is returned.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy)]
pub struct NnlsOptions {
    /// Relative KKT tolerance; the absolute bound is `tol * max(1, |b|_inf)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions { tol: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub weights: Vec<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// Whether `kkt_residual <= tol * max(1, |b|_inf)`.
    pub converged: bool,
    /// Coordinates with `S_rr = 0`, pinned at zero.
    pub frozen: Vec<usize>,
    /// Set when the active-set finish produced the returned point.
    pub active_set_finish: bool,
}

/// KKT stationarity residual at `pi`, with `g = 2 (S pi - b)`:
/// the largest of `max(0, -g_r)` and `|pi_r g_r| / max(1, |b_r|)` over
/// coordinates with `S_rr > 0`.
pub fn kkt_residual(sigma: &DMatrix<f64>, b: &[f64], pi: &[f64]) -> f64 {
    let m = b.len();
    let mut worst: f64 = 0.0;
    for r in 0..m {
        if sigma[(r, r)] <= 0.0 {
            continue;
        }
        let g = 2.0 * ((0..m).map(|s| sigma[(r, s)] * pi[s]).sum::<f64>() - b[r]);
        worst = worst.max(-g).max((pi[r] * g).abs() / b[r].abs().max(1.0));
    }
    worst
}

/// `pi' S pi - 2 b' pi`.
pub fn objective(sigma: &DMatrix<f64>, b: &[f64], pi: &[f64]) -> f64 {
    let m = b.len();
    let mut q = 0.0;
    for r in 0..m {
        let row: f64 = (0..m).map(|s| sigma[(r, s)] * pi[s]).sum();
        q += pi[r] * (row - 2.0 * b[r]);
    }
    q
}

fn threshold(b: &[f64], tol: f64) -> f64 {
    tol * b.iter().fold(1.0f64, |acc, x| acc.max(x.abs()))
}

pub fn nnls_gram(sigma: &DMatrix<f64>, b: &[f64], opts: NnlsOptions) -> NnlsSolution {
    let m = b.len();
    assert_eq!(sigma.nrows(), m, "Gram matrix and b disagree in size");
    let frozen: Vec<usize> = (0..m).filter(|&r| sigma[(r, r)] <= 0.0).collect();
    if !frozen.is_empty() {
        log::warn!("{} candidate(s) vanish on the hold-out set; their weights are fixed at 0", frozen.len());
    }
    let bound = threshold(b, opts.tol);
    let mut pi = vec![0.0; m];
    // grad = S pi - b, kept up to date incrementally within a sweep.
    let mut grad: Vec<f64> = b.iter().map(|x| -x).collect();
    let mut sweeps = 0;
    let mut residual = kkt_residual(sigma, b, &pi);
    while residual > bound && sweeps < opts.max_sweeps {
        for r in 0..m {
            let d = sigma[(r, r)];
            if d <= 0.0 {
                continue;
            }
            let next = (pi[r] - grad[r] / d).max(0.0);
            let step = next - pi[r];
            if step != 0.0 {
                pi[r] = next;
                for s in 0..m {
                    grad[s] += step * sigma[(s, r)];
                }
            }
        }
        sweeps += 1;
        for (s, g) in grad.iter_mut().enumerate() {
            *g = (0..m).map(|t| sigma[(s, t)] * pi[t]).sum::<f64>() - b[s];
        }
        residual = kkt_residual(sigma, b, &pi);
    }
    if residual <= bound {
        // Coordinate descent identifies the support long before the weights
        // settle on ill-conditioned problems; an exact solve on that support
        // removes the remaining error when it stays feasible.
        let support: Vec<usize> = (0..m).filter(|&r| pi[r] > 0.0).collect();
        if !support.is_empty() {
            let z = solve_passive(sigma, b, &support);
            if z.iter().all(|&v| v > 0.0) {
                let mut polished = vec![0.0; m];
                support.iter().zip(&z).for_each(|(&r, &v)| polished[r] = v);
                let polished_residual = kkt_residual(sigma, b, &polished);
                if polished_residual <= residual {
                    pi = polished;
                    residual = polished_residual;
                }
            }
        }
        return NnlsSolution { weights: pi, sweeps, kkt_residual: residual, converged: true, frozen, active_set_finish: false };
    }

    let alt = active_set(sigma, b, &frozen, bound);
    let alt_residual = kkt_residual(sigma, b, &alt);
    let use_alt = alt_residual < residual || objective(sigma, b, &alt) < objective(sigma, b, &pi);
    let (weights, kkt) = if use_alt { (alt, alt_residual) } else { (pi, residual) };
    if kkt > bound {
        log::warn!("NNLS stopped with KKT residual {kkt:e} above {bound:e}");
    }
    NnlsSolution { weights, sweeps, kkt_residual: kkt, converged: kkt <= bound, frozen, active_set_finish: use_alt }
}

/// Solves `S_PP z = b_P` on a passive set, falling back to a pseudo-inverse
/// when the sub-block is singular.
fn solve_passive(sigma: &DMatrix<f64>, b: &[f64], passive: &[usize]) -> Vec<f64> {
    let k = passive.len();
    let sub = DMatrix::from_fn(k, k, |i, j| sigma[(passive[i], passive[j])]);
    let rhs = nalgebra::DVector::from_iterator(k, passive.iter().map(|&r| b[r]));
    if let Some(ch) = sub.clone().cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    super::ols::pinv_solve(&sub, rhs.as_slice())
}

/// Lawson-Hanson active-set iteration on the Gram form.
fn active_set(sigma: &DMatrix<f64>, b: &[f64], frozen: &[usize], bound: f64) -> Vec<f64> {
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut passive: Vec<usize> = Vec::new();
    for _ in 0..(3 * m + 10) {
        // w = b - S x: the negative half-gradient.
        let w: Vec<f64> = (0..m).map(|r| b[r] - (0..m).map(|s| sigma[(r, s)] * x[s]).sum::<f64>()).collect();
        let entering = (0..m)
            .filter(|r| !passive.contains(r) && !frozen.contains(r))
            .filter(|&r| w[r] > 0.5 * bound)
            .max_by(|&a, &c| w[a].total_cmp(&w[c]).then(c.cmp(&a)));
        let Some(j) = entering else { break };
        passive.push(j);
        for _ in 0..(3 * m + 10) {
            let z = solve_passive(sigma, b, &passive);
            if z.iter().all(|&v| v > 0.0) {
                for (&r, &v) in passive.iter().zip(&z) {
                    x[r] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&r, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    let denom = x[r] - v;
                    if denom > 0.0 {
                        alpha = alpha.min(x[r] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (&r, &v) in passive.iter().zip(&z) {
                x[r] += alpha * (v - x[r]);
            }
            passive.retain(|&r| {
                if x[r] <= 1e-15 {
                    x[r] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}
