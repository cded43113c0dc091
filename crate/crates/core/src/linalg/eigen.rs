//! Leading eigenpairs (by absolute eigenvalue) of symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::seeded;

/// Residual bound every returned eigenpair must satisfy: `|A v - lambda v| <= RESIDUAL_TOL`.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Above this node count [`EigenBackend::Auto`] switches from the dense solver to Lanczos.
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenBackend {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

impl EigenBackend {
    fn resolve(self, n: usize) -> EigenBackend {
        match self {
            EigenBackend::Auto if n > DENSE_LIMIT => EigenBackend::Lanczos,
            EigenBackend::Auto => EigenBackend::Dense,
            other => other,
        }
    }
}

/// Top eigenpairs of a symmetric matrix, ordered by descending `|lambda|`.
///
/// Columns of `vectors` are orthonormal. Each column's sign is fixed so that
/// its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rank-`r` reconstruction `sum_{l < r} lambda_l v_l v_l^T`.
    pub fn reconstruct(&self, rank: usize) -> DMatrix<f64> {
        let r = rank.min(self.len());
        let v = self.vectors.columns(0, r);
        let scaled = DMatrix::from_fn(self.n(), r, |i, l| v[(i, l)] * self.values[l]);
        &scaled * v.transpose()
    }
}

/// Sort key: larger `|lambda|` first, positive before negative on ties.
fn order_by_magnitude(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    idx
}

fn fix_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() + 1e-12 {
            best = i;
        }
    }
    if col.get(best).is_some_and(|&x| x < 0.0) {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

fn assemble(n: usize, pairs: Vec<(f64, Vec<f64>)>) -> SpectralBasis {
    let k = pairs.len();
    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (l, (lambda, mut v)) in pairs.into_iter().enumerate() {
        fix_sign(&mut v);
        vectors.set_column(l, &DVector::from_vec(v));
        values.push(lambda);
    }
    SpectralBasis { values, vectors }
}

/// Top-`k` eigenpairs of a dense symmetric matrix.
pub fn leading_eigen_dense(a: &DMatrix<f64>, k: usize) -> Result<SpectralBasis> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension { expected: n, got: a.ncols() });
    }
    check_k(n, k)?;
    let eig = SymmetricEigen::new(a.clone());
    let order = order_by_magnitude(eig.eigenvalues.as_slice());
    let pairs = order
        .into_iter()
        .take(k)
        .map(|l| (eig.eigenvalues[l], eig.eigenvectors.column(l).iter().copied().collect()))
        .collect();
    Ok(assemble(n, pairs))
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::domain(format!("requested {k} eigenpairs of a {n} x {n} matrix")));
    }
    Ok(())
}

/// Top-`k` eigenpairs of a graph's adjacency matrix.
pub fn leading_eigen(g: &Graph, k: usize) -> Result<SpectralBasis> {
    leading_eigen_with(g, k, EigenBackend::Auto)
}

pub fn leading_eigen_with(g: &Graph, k: usize, backend: EigenBackend) -> Result<SpectralBasis> {
    check_k(g.n(), k)?;
    match backend.resolve(g.n()) {
        EigenBackend::Lanczos => lanczos(g.n(), k, |x, y| g.adjacency_matvec(x, y)),
        _ => leading_eigen_dense(&g.to_dense(), k),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Lanczos with full reorthogonalization on a matrix-free symmetric operator.
///
/// The Krylov dimension doubles until every requested Ritz pair meets
/// [`RESIDUAL_TOL`]. A single start vector finds one copy of each repeated
/// eigenvalue unless the iteration breaks down, so use the dense path when
/// exact multiplicities matter.
pub fn lanczos<F>(n: usize, k: usize, matvec: F) -> Result<SpectralBasis>
where
    F: Fn(&[f64], &mut [f64]),
{
    check_k(n, k)?;
    let mut rng = seeded(0x6c61_6e63_7a6f_7321);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..4 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut v, basis);
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                return Some(v);
            }
        }
        None
    };

    let mut dim = n.min((2 * k + 20).max(40));
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut alpha = Vec::with_capacity(dim);
        let mut beta: Vec<f64> = Vec::with_capacity(dim);
        let mut v = random_unit(&basis).expect("random start vector");
        let mut w = vec![0.0; n];
        loop {
            matvec(&v, &mut w);
            let a = dot(&v, &w);
            alpha.push(a);
            basis.push(v);
            orthogonalize(&mut w, &basis);
            if basis.len() == dim {
                break;
            }
            let b = dot(&w, &w).sqrt();
            if b > 1e-10 * (1.0 + a.abs()) {
                beta.push(b);
                v = w.iter().map(|x| x / b).collect();
            } else {
                // Invariant subspace: restart in its orthogonal complement.
                match random_unit(&basis) {
                    Some(fresh) => {
                        beta.push(0.0);
                        v = fresh;
                    }
                    None => break,
                }
            }
        }
        let m = basis.len();
        let tri = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let order = order_by_magnitude(eig.eigenvalues.as_slice());
        let mut pairs = Vec::with_capacity(k);
        let mut worst: f64 = 0.0;
        let mut av = vec![0.0; n];
        for &l in order.iter().take(k.min(m)) {
            let theta = eig.eigenvalues[l];
            let y = eig.eigenvectors.column(l);
            let mut x = vec![0.0; n];
            for (c, q) in y.iter().zip(&basis) {
                x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
            }
            let norm = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|xi| *xi /= norm);
            matvec(&x, &mut av);
            let res = av.iter().zip(&x).map(|(p, q)| (p - theta * q).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(res);
            pairs.push((theta, x));
        }
        if pairs.len() == k && worst <= RESIDUAL_TOL {
            return Ok(assemble(n, pairs));
        }
        if dim >= n {
            return Err(Error::domain(format!(
                "Lanczos failed to reach residual {RESIDUAL_TOL:e} (worst {worst:e})"
            )));
        }
        dim = n.min(dim * 2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DMatrix<f64>, b: &SpectralBasis, l: usize) -> f64 {
        let v = b.vectors.column(l);
        (a * v - v * b.values[l]).norm()
    }

    fn cycle(n: usize) -> Graph {
        Graph::from_pairs(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn four_cycle_spectrum() {
        // Dense oracle: the 4-cycle adjacency has eigenvalues 2 cos(2 pi j / 4) = {2, 0, -2, 0}.
        let b = leading_eigen(&cycle(4), 4).unwrap();
        let mut got = b.values.clone();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((g - e).abs() < 1e-12, "{got:?}");
        }
        assert!((b.values[0] - 2.0).abs() < 1e-12);
        assert!((b.values[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_top_pair() {
        let k3 = Graph::from_pairs(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let b = leading_eigen(&k3, 1).unwrap();
        assert!((b.values[0] - 2.0).abs() < 1e-12);
        let c = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert!((b.vectors[(i, 0)] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_graph_is_all_zero() {
        for backend in [EigenBackend::Dense, EigenBackend::Lanczos] {
            let b = leading_eigen_with(&Graph::empty(6), 3, backend).unwrap();
            assert!(b.values.iter().all(|&x| x.abs() < 1e-12));
            let gram = b.vectors.transpose() * &b.vectors;
            assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(leading_eigen(&cycle(4), 5).is_err());
        assert!(leading_eigen(&cycle(4), 0).is_err());
    }

    #[test]
    fn lanczos_matches_dense() {
        // Two overlapping communities with a random sprinkle, so the top
        // eigenvalues are well separated and simple.
        let mut rng = seeded(11);
        let n = 120;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if (i < 70) == (j < 70) { 0.25 } else { 0.03 };
                if rng.random::<f64>() < p {
                    pairs.push((i, j));
                }
            }
        }
        let g = Graph::from_pairs(n, pairs).unwrap();
        let a = g.to_dense();
        let dense = leading_eigen_with(&g, 4, EigenBackend::Dense).unwrap();
        let lz = leading_eigen_with(&g, 4, EigenBackend::Lanczos).unwrap();
        for l in 0..4 {
            assert!((dense.values[l] - lz.values[l]).abs() < 1e-8);
            assert!(residual(&a, &lz, l) <= RESIDUAL_TOL);
            assert!(residual(&a, &dense, l) <= 1e-9);
        }
        let gram = lz.vectors.transpose() * &lz.vectors;
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-8);
    }
}
