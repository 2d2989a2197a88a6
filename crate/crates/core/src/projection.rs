//! Two-dimensional views: PCA in input space, kernel PCA in feature space.
//!
//! Axes are ordered by descending eigenvalue. Each axis is oriented so that
//! the first nonzero entry of its eigenvector is positive (the loading vector
//! for PCA, the coordinate vector for kernel PCA). Eigenvalues are reported
//! in variance units (divided by N − 1) for both.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};
use crate::kernels::GramMatrix;
use crate::model::DataMatrix;

/// Eigenvalues at or below this fraction of the largest magnitude count as zero.
const RELATIVE_EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub explained: [f64; 2],
    /// Sum of positive eigenvalues, same units as `explained`.
    pub total_variance: f64,
    /// Set when the leading eigenvalue is numerically zero.
    pub degenerate: bool,
}

impl Embedding2D {
    /// Fraction of the total variance carried by the two axes.
    pub fn explained_share(&self) -> f64 {
        if self.total_variance <= 0.0 {
            0.0
        } else {
            (self.explained[0].max(0.0) + self.explained[1].max(0.0)) / self.total_variance
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue (ties by original index).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn orientation(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .find(|x| x.abs() > 1e-9 * scale)
        .map_or(1.0, |x| x.signum())
}

fn eigen_tol(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    RELATIVE_EIGEN_TOL * scale.max(1e-300)
}

pub fn pca_2d(data: &DataMatrix) -> Result<Embedding2D> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(OkmError::InvalidData("PCA needs at least two objects".into()));
    }
    let x = DMatrix::from_row_slice(n, d, data.values());
    let means = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let (values, vectors) = sorted_eigen(cov);
    let tol = eigen_tol(&values);

    let mut coords = vec![[0.0; 2]; n];
    let mut explained = [0.0; 2];
    for axis in 0..2.min(d) {
        explained[axis] = values[axis];
        if values[axis] <= tol {
            continue;
        }
        let v = vectors.column(axis);
        let sign = orientation(v.iter().copied());
        let projected = &centered * v;
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = sign * projected[i];
        }
    }
    Ok(Embedding2D {
        coords,
        explained,
        total_variance: values.iter().filter(|&&v| v > tol).sum(),
        degenerate: values[0] <= tol,
    })
}

/// Double-center a gram matrix: `K − 1K/N − K1/N + 1K1/N²`.
pub fn center_gram(k: &GramMatrix) -> DMatrix<f64> {
    let n = k.n();
    let m = k.to_dmatrix();
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // K is symmetric, so column means equal row means
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - row_means[j] + grand)
}

pub fn kpca_2d(k: &GramMatrix) -> Result<Embedding2D> {
    let n = k.n();
    if n < 2 {
        return Err(OkmError::InvalidData("kernel PCA needs at least two objects".into()));
    }
    let (values, vectors) = sorted_eigen(center_gram(k));
    let tol = eigen_tol(&values);
    let scale = 1.0 / (n - 1) as f64;

    let mut coords = vec![[0.0; 2]; n];
    let mut explained = [0.0; 2];
    for axis in 0..2.min(n) {
        explained[axis] = values[axis] * scale;
        if values[axis] <= tol {
            continue;
        }
        let v = vectors.column(axis);
        let sign = orientation(v.iter().copied());
        let root = values[axis].sqrt();
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = sign * root * v[i];
        }
    }
    let degenerate = values[0] <= tol;
    if degenerate {
        log::warn!("kernel PCA: centered gram has no positive eigenvalue");
    }
    Ok(Embedding2D {
        coords,
        explained,
        total_variance: values.iter().filter(|&&v| v > tol).sum::<f64>() * scale,
        degenerate,
    })
}
