//! Kernel functions and gram matrices.
//!
//! The kernel solver never sees feature vectors `φ(x)`; all of feature space
//! is reached through the N × N gram matrix built here.
//!
//! Conventions:
//! - polynomial: `(x·y + offset)^degree`, offset defaults to 1;
//! - RBF: `exp(-‖x − y‖² / (2σ²))`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};
use crate::model::DataMatrix;

pub const DEFAULT_POLY_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    #[serde(rename = "poly")]
    Polynomial {
        degree: f64,
        #[serde(default = "default_offset")]
        offset: f64,
    },
    Rbf {
        sigma: f64,
    },
}

fn default_offset() -> f64 {
    DEFAULT_POLY_OFFSET
}

impl KernelSpec {
    pub fn polynomial(degree: f64) -> Self {
        KernelSpec::Polynomial {
            degree,
            offset: DEFAULT_POLY_OFFSET,
        }
    }

    pub fn rbf(sigma: f64) -> Self {
        KernelSpec::Rbf { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if !(degree > 0.0 && degree.is_finite()) {
                    return Err(OkmError::InvalidConfig(format!(
                        "polynomial degree must be positive, got {degree}"
                    )));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(OkmError::InvalidConfig(format!(
                        "polynomial offset must be nonnegative, got {offset}"
                    )));
                }
                Ok(())
            }
            KernelSpec::Rbf { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(OkmError::InvalidConfig(format!(
                        "RBF sigma must be positive, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, offset } => {
                write!(f, "poly(degree={degree}, offset={offset})")
            }
            KernelSpec::Rbf { sigma } => write!(f, "rbf(sigma={sigma})"),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(OkmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    match *spec {
        KernelSpec::Linear => Ok(dot(x, y)),
        KernelSpec::Polynomial { degree, offset } => {
            let base = dot(x, y) + offset;
            if degree.fract() == 0.0 && degree.abs() <= i32::MAX as f64 {
                Ok(base.powi(degree as i32))
            } else if base < 0.0 {
                Err(OkmError::KernelDomain {
                    pair: None,
                    base,
                    degree,
                })
            } else {
                Ok(base.powf(degree))
            }
        }
        KernelSpec::Rbf { sigma } => Ok((-squared_distance(x, y) / (2.0 * sigma * sigma)).exp()),
    }
}

/// Dense symmetric N × N matrix of kernel evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    /// Wrap a row-major buffer. The input must be symmetric up to rounding
    /// (1e-9 relative to the largest entry); it is then symmetrized exactly.
    pub fn from_values(n: usize, mut values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(OkmError::InvalidData("gram matrix must be non-empty".into()));
        }
        if values.len() != n * n {
            return Err(OkmError::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OkmError::InvalidData("gram matrix has non-finite entries".into()));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if (a - b).abs() > 1e-9 * scale {
                    return Err(OkmError::InvalidData(format!(
                        "gram matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let mean = 0.5 * (a + b);
                values[i * n + j] = mean;
                values[j * n + i] = mean;
            }
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gram matrix of `spec` over the rows of `data`. Each unordered pair is
/// evaluated once and mirrored.
pub fn gram(spec: &KernelSpec, data: &DataMatrix) -> Result<GramMatrix> {
    spec.validate()?;
    let n = data.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    kernel_eval(spec, data.row(i), data.row(j)).map_err(|e| match e {
                        OkmError::KernelDomain { base, degree, .. } => OkmError::KernelDomain {
                            pair: Some((i, j)),
                            base,
                            degree,
                        },
                        other => other,
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(GramMatrix { n, values })
}

/// True iff the smallest eigenvalue of `k` is at least `-tol`.
pub fn psd_check(k: &GramMatrix, tol: f64) -> bool {
    k.min_eigenvalue() >= -tol
}
