//! Numerical building blocks: symmetric eigensolvers and k-means.

pub mod eigen;
pub mod kmeans;

pub use eigen::{leading_eigen, leading_eigen_dense, leading_eigen_with, lanczos, EigenBackend, SpectralBasis};
pub use kmeans::{kmeans, nearest, Clustering, KMeansConfig};
