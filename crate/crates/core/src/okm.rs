//! Input-space overlapping k-means.
//!
//! Objective: `J = Σ_i ‖x_i − im(x_i)‖²`, where the image `im(x_i)` is the
//! plain mean of the centers of every cluster holding `x_i`. Centers are the
//! weighted means `m_c = Σ_j P_jc w_j x_j / W_c` with `w_j = 1 / L_j²`, so an
//! object shared by several clusters pulls each of them less.

use crate::config::{ClusteringResult, SolverConfig};
use crate::error::{OkmError, Result};
use crate::model::{cluster_weights, membership_weights, DataMatrix, MembershipMatrix, WeightVector};
use crate::solver::{self, Geometry};

/// One center per cluster, k × d row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    k: usize,
    d: usize,
    centers: Vec<f64>,
}

impl PrototypeSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut centers = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(OkmError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            centers.extend_from_slice(row);
        }
        Ok(Self {
            k: rows.len(),
            d,
            centers,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.d..(c + 1) * self.d]
    }
}

pub fn prototypes(data: &DataMatrix, p: &MembershipMatrix, w: &WeightVector) -> Result<PrototypeSet> {
    if p.n() != data.rows() {
        return Err(OkmError::DimensionMismatch {
            expected: data.rows(),
            found: p.n(),
        });
    }
    let d = data.cols();
    let totals = cluster_weights(p, w);
    let mut centers = vec![0.0; p.k() * d];
    for j in 0..p.n() {
        let x = data.row(j);
        for c in p.clusters_of(j) {
            let center = &mut centers[c * d..(c + 1) * d];
            for (m, xv) in center.iter_mut().zip(x) {
                *m += w[j] * xv;
            }
        }
    }
    for (c, &total) in totals.iter().enumerate() {
        if total <= 0.0 {
            return Err(OkmError::EmptyCluster { cluster: c });
        }
        for m in &mut centers[c * d..(c + 1) * d] {
            *m /= total;
        }
    }
    Ok(PrototypeSet {
        k: p.k(),
        d,
        centers,
    })
}

fn mean_of_centers(protos: &PrototypeSet, clusters: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; protos.dim()];
    for &c in clusters {
        for (o, m) in out.iter_mut().zip(protos.center(c)) {
            *o += m;
        }
    }
    let l = clusters.len() as f64;
    out.iter_mut().for_each(|o| *o /= l);
    out
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `im(x_i)`: the unweighted mean of the centers of the clusters holding `i`.
pub fn image(x_index: usize, p: &MembershipMatrix, protos: &PrototypeSet) -> Vec<f64> {
    mean_of_centers(protos, &p.clusters_of(x_index))
}

pub fn objective(data: &DataMatrix, p: &MembershipMatrix, protos: &PrototypeSet) -> Result<f64> {
    if let Some(row) = (0..p.n()).find(|&i| p.multiplicity(i) == 0) {
        return Err(OkmError::Coverage { row });
    }
    Ok((0..p.n())
        .map(|i| squared_distance(data.row(i), &image(i, p, protos)))
        .sum())
}

/// New cluster set for object `x_index` against frozen prototypes.
///
/// `max_clusters` caps `|A_i|` (`None` means up to k).
pub fn assign_object(
    x_index: usize,
    data: &DataMatrix,
    protos: &PrototypeSet,
    current: &MembershipMatrix,
    max_clusters: Option<usize>,
) -> Vec<usize> {
    let x = data.row(x_index);
    solver::greedy_prefix(
        protos.k(),
        &current.clusters_of(x_index),
        max_clusters.unwrap_or(protos.k()),
        |c| squared_distance(x, protos.center(c)),
        |set| squared_distance(x, &mean_of_centers(protos, set)),
    )
}

pub(crate) struct Euclidean<'a> {
    data: &'a DataMatrix,
}

impl<'a> Euclidean<'a> {
    pub(crate) fn new(data: &'a DataMatrix) -> Self {
        Self { data }
    }
}

impl Geometry for Euclidean<'_> {
    type State = PrototypeSet;

    fn n(&self) -> usize {
        self.data.rows()
    }

    fn state(&self, p: &MembershipMatrix) -> Result<PrototypeSet> {
        let w = membership_weights(p)?;
        prototypes(self.data, p, &w)
    }

    fn dist_to_prototype(&self, st: &PrototypeSet, i: usize, c: usize) -> f64 {
        squared_distance(self.data.row(i), st.center(c))
    }

    fn dist_to_image(&self, st: &PrototypeSet, i: usize, clusters: &[usize]) -> f64 {
        squared_distance(self.data.row(i), &mean_of_centers(st, clusters))
    }
}

/// Run OKM on `data`. `init` is required iff `config.init` is
/// [`InitPolicy::ProvidedMembership`](crate::config::InitPolicy::ProvidedMembership).
pub fn solve(
    data: &DataMatrix,
    config: &SolverConfig,
    init: Option<&MembershipMatrix>,
) -> Result<ClusteringResult> {
    solver::run(&Euclidean::new(data), config, init)
}
