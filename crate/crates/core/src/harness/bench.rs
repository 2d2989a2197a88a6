//! Multi-run comparison of solver configurations on labeled data.
//!
//! Run `r` draws one random singleton initialization from seed
//! `base_seed + r` and hands the same membership to every method, so methods
//! differ only in their distance model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::SolverKind;
use super::synth::{gen_synthetic, SyntheticSpec};
use crate::config::{ClusteringResult, InitPolicy, SolverConfig};
use crate::error::{OkmError, Result};
use crate::eval::{evaluate, LabelSets, Scores};
use crate::kernels::{gram, KernelSpec};
use crate::model::{DataMatrix, MembershipMatrix};
use crate::okmk::gram_is_psd;
use crate::solver::random_singleton;
use crate::{okm, okmk};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub solver: SolverKind,
    pub config: SolverConfig,
}

impl MethodSpec {
    pub fn okm(name: &str, k: usize) -> Self {
        Self {
            name: name.into(),
            solver: SolverKind::Okm,
            config: SolverConfig::new(k),
        }
    }

    pub fn okmk(name: &str, k: usize, kernel: KernelSpec) -> Self {
        Self {
            name: name.into(),
            solver: SolverKind::Okmk,
            config: SolverConfig::new(k).with_kernel(kernel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub init_digest: String,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub final_objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub mean: Scores,
    /// Sample standard deviation (0 for a single run).
    pub std: Scores,
    pub psd_warning: bool,
    pub runs: Vec<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    pub methods: Vec<MethodSummary>,
}

impl RunReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Short hex digest of a membership matrix.
pub fn membership_digest(p: &MembershipMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update((p.n() as u64).to_le_bytes());
    hasher.update((p.k() as u64).to_le_bytes());
    for i in 0..p.n() {
        hasher.update(p.row(i).iter().map(|&b| b as u8).collect::<Vec<u8>>());
    }
    hex::encode(&hasher.finalize()[..8])
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(method: &MethodSpec, runs: Vec<RunMetrics>, psd_warning: bool) -> MethodSummary {
    let (mp, sp) = mean_std(runs.iter().map(|r| r.precision));
    let (mr, sr) = mean_std(runs.iter().map(|r| r.recall));
    let (mf, sf) = mean_std(runs.iter().map(|r| r.f));
    MethodSummary {
        name: method.name.clone(),
        solver: method.solver,
        config: method.config.clone(),
        mean: Scores {
            precision: mp,
            recall: mr,
            f: mf,
        },
        std: Scores {
            precision: sp,
            recall: sr,
            f: sf,
        },
        psd_warning,
        runs,
    }
}

pub fn run_benchmark(
    data: &DataMatrix,
    truth: &LabelSets,
    methods: &[MethodSpec],
    runs: usize,
    base_seed: u64,
) -> Result<RunReport> {
    let k = methods
        .first()
        .ok_or_else(|| OkmError::InvalidConfig("no methods to compare".into()))?
        .config
        .k;
    if let Some(m) = methods.iter().find(|m| m.config.k != k) {
        return Err(OkmError::InvalidConfig(format!(
            "method `{}` uses k = {}, expected the shared k = {k}",
            m.name, m.config.k
        )));
    }
    if runs == 0 {
        return Err(OkmError::InvalidConfig("runs must be at least 1".into()));
    }
    if truth.len() != data.rows() {
        return Err(OkmError::DimensionMismatch {
            expected: data.rows(),
            found: truth.len(),
        });
    }

    let seeds: Vec<u64> = (0..runs as u64).map(|r| base_seed.wrapping_add(r)).collect();
    let inits = seeds
        .iter()
        .map(|&s| random_singleton(data.rows(), k, s))
        .collect::<Result<Vec<_>>>()?;

    let grams = methods
        .iter()
        .map(|m| match m.solver {
            SolverKind::Okm => Ok(None),
            SolverKind::Okmk => gram(&m.config.kernel, data).map(Some),
        })
        .collect::<Result<Vec<_>>>()?;
    let psd: Vec<bool> = grams
        .iter()
        .map(|g| g.as_ref().is_none_or(gram_is_psd))
        .collect();
    for (m, ok) in methods.iter().zip(&psd) {
        if !ok {
            log::warn!("method `{}`: gram matrix is not positive semidefinite", m.name);
        }
    }

    let cells: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..runs).map(move |r| (m, r)))
        .collect();
    let outcomes = cells
        .par_iter()
        .map(|&(m, r)| {
            let method = &methods[m];
            let config = method
                .config
                .clone()
                .with_seed(seeds[r])
                .with_init(InitPolicy::ProvidedMembership);
            let init = &inits[r];
            let solved: Result<ClusteringResult> = match &grams[m] {
                None => okm::solve(data, &config, Some(init)),
                Some(g) => okmk::solve_kernel(g, &config, Some(init)),
            };
            let wrap = |source| OkmError::Benchmark {
                method: method.name.clone(),
                run: r,
                source: Box::new(source),
            };
            let result = solved.map_err(wrap)?;
            let scores = evaluate(&result.memberships, truth).map_err(wrap)?;
            Ok(RunMetrics {
                run: r,
                seed: seeds[r],
                init_digest: membership_digest(init),
                precision: scores.precision,
                recall: scores.recall,
                f: scores.f,
                final_objective: result.final_objective(),
                iterations: result.iterations_run,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_method: Vec<Vec<RunMetrics>> = vec![Vec::with_capacity(runs); methods.len()];
    for (&(m, _), metrics) in cells.iter().zip(outcomes) {
        per_method[m].push(metrics);
    }
    let summaries = methods
        .iter()
        .zip(per_method)
        .zip(psd)
        .map(|((method, runs), ok)| summarize(method, runs, !ok))
        .collect();

    Ok(RunReport {
        dataset: String::new(),
        n: data.rows(),
        k,
        runs,
        base_seed,
        seeds,
        synthetic: None,
        methods: summaries,
    })
}

/// Named experiment bundles: a synthetic dataset plus the methods to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three overlapping Gaussian classes (21/26/17 + 11 shared) compared
    /// across OKM, linear OKM-K, polynomial OKM-K (degree 0.25) and RBF
    /// OKM-K (σ = 2).
    EachmovieAnalog,
    /// Two concentric rings with an overlap band; OKM against RBF OKM-K over
    /// σ ∈ {0.5, 1, 2, 4}.
    Rings,
}

pub const RING_SIGMAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::EachmovieAnalog => "eachmovie-analog",
            Preset::Rings => "rings",
        }
    }

    pub fn synthetic(self, seed: u64) -> SyntheticSpec {
        match self {
            Preset::EachmovieAnalog => SyntheticSpec::eachmovie_analog(seed),
            Preset::Rings => SyntheticSpec::rings(seed),
        }
    }

    pub fn methods(self) -> Vec<MethodSpec> {
        match self {
            Preset::EachmovieAnalog => vec![
                MethodSpec::okm("okm-euclidean", 3),
                MethodSpec::okmk("okmk-linear", 3, KernelSpec::Linear),
                MethodSpec::okmk("okmk-poly-0.25", 3, KernelSpec::polynomial(0.25)),
                MethodSpec::okmk("okmk-rbf-2", 3, KernelSpec::rbf(2.0)),
            ],
            Preset::Rings => {
                let mut methods = vec![MethodSpec::okm("okm-euclidean", 2)];
                methods.extend(
                    RING_SIGMAS
                        .iter()
                        .map(|&s| MethodSpec::okmk(&format!("okmk-rbf-{s}"), 2, KernelSpec::rbf(s))),
                );
                methods
            }
        }
    }

    /// Generate the dataset from `data_seed` and run the comparison.
    pub fn run(self, runs: usize, base_seed: u64, data_seed: u64) -> Result<RunReport> {
        let spec = self.synthetic(data_seed);
        let (data, truth) = gen_synthetic(&spec)?;
        let mut report = run_benchmark(&data, &truth, &self.methods(), runs, base_seed)?;
        report.dataset = self.name().into();
        report.synthetic = Some(spec);
        Ok(report)
    }
}
