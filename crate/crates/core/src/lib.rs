//! Overlapping k-means (OKM) and its kernel extension (OKM-K).
//!
//! Both solvers look for a cover of the data by `k` possibly overlapping
//! clusters, minimizing the summed squared distance between each object and
//! its *image*: the mean of the prototypes of every cluster it belongs to.
//! [`okm`] works on feature vectors; [`okmk`] works on a gram matrix only,
//! so any Mercer kernel turns the same search into a non-linear one.
//!
//! ```
//! use overlapping_kmeans::{kernels::KernelSpec, okmk, DataMatrix, SolverConfig};
//!
//! let data = DataMatrix::from_rows(&[
//!     vec![0.0, 0.0], vec![0.2, 0.1], vec![5.0, 5.0], vec![5.1, 4.9], vec![2.5, 2.5],
//! ]).unwrap();
//! let config = SolverConfig::new(2).with_kernel(KernelSpec::rbf(2.0)).with_seed(7);
//! let result = okmk::solve_kernel_features(&data, &config, None).unwrap();
//! assert_eq!(result.memberships.n(), 5);
//! ```

pub mod config;
pub mod error;
pub mod eval;
pub mod harness;
pub mod kernels;
pub mod model;
pub mod okm;
pub mod okmk;
pub mod projection;
mod solver;

pub use config::{ClusteringResult, ConvergedBy, InitPolicy, SolverConfig};
pub use error::{OkmError, Result};
pub use model::{cluster_weights, coverage_check, membership_weights, DataMatrix, MembershipMatrix, WeightVector};
pub use solver::random_singleton;
