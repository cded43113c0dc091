use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue cutoff for the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Minimum-norm solution of `S x = b` for symmetric PSD `S`, dropping
/// eigenvalues at or below `PINV_CUTOFF * max |lambda|`.
pub fn pinv_solve(sigma: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let m = b.len();
    if m == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut x = vec![0.0; m];
    if top == 0.0 {
        return x;
    }
    for (l, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= PINV_CUTOFF * top {
            continue;
        }
        let v = eig.eigenvectors.column(l);
        let coef = v.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() / lambda;
        x.iter_mut().zip(v.iter()).for_each(|(xi, vi)| *xi += coef * vi);
    }
    x
}

/// Unconstrained least-squares mixing weights: the minimum-norm solution of `S pi = b`.
pub fn ols_mix_gram(sigma: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    pinv_solve(sigma, b)
}
