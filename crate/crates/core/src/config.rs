//! Solver configuration and results.

use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};
use crate::kernels::KernelSpec;
use crate::model::MembershipMatrix;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// Each object in one uniformly drawn cluster, redrawn until no cluster is empty.
    RandomSingleton,
    /// Caller supplies the initial membership matrix.
    ProvidedMembership,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop once `(J_prev − J_new) / max(J_prev, ε)` drops below this.
    #[serde(default = "default_min_improvement")]
    pub min_improvement: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_init")]
    pub init: InitPolicy,
    /// Upper bound on `|A_i|`; `Some(1)` reduces the solvers to hard k-means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clusters_per_object: Option<usize>,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::Linear
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_min_improvement() -> f64 {
    DEFAULT_MIN_IMPROVEMENT
}
fn default_init() -> InitPolicy {
    InitPolicy::RandomSingleton
}

impl SolverConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            kernel: KernelSpec::Linear,
            max_iter: DEFAULT_MAX_ITER,
            min_improvement: DEFAULT_MIN_IMPROVEMENT,
            seed: 0,
            init: InitPolicy::RandomSingleton,
            max_clusters_per_object: None,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_min_improvement(mut self, min_improvement: f64) -> Self {
        self.min_improvement = min_improvement;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_clusters_per_object(mut self, limit: usize) -> Self {
        self.max_clusters_per_object = Some(limit);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(OkmError::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(OkmError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.min_improvement >= 0.0 && self.min_improvement.is_finite()) {
            return Err(OkmError::InvalidConfig(format!(
                "min_improvement must be a nonnegative number, got {}",
                self.min_improvement
            )));
        }
        if self.max_clusters_per_object == Some(0) {
            return Err(OkmError::InvalidConfig(
                "max_clusters_per_object must be at least 1".into(),
            ));
        }
        self.kernel.validate()
    }

    /// Effective cap on clusters per object.
    pub(crate) fn assignment_limit(&self) -> usize {
        self.max_clusters_per_object.unwrap_or(self.k).min(self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    MaxIter,
    ImprovementThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub memberships: MembershipMatrix,
    /// Objective after each completed iteration; non-increasing.
    pub objective_trace: Vec<f64>,
    /// Objective of the initial membership.
    pub initial_objective: f64,
    pub iterations_run: usize,
    pub converged_by: ConvergedBy,
    /// Whether the gram matrix passed the PSD check; `None` for the input-space solver.
    pub psd_ok: Option<bool>,
}

impl ClusteringResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}
