//! Kernel overlapping k-means.
//!
//! Same objective as [`crate::okm`], measured in the feature space of a
//! kernel. Prototypes are never materialized: cluster `c`'s prototype is the
//! convex combination `Σ_j a_jc φ(x_j)` with `a_jc = P_jc w_j / W_c`, and every
//! distance is expanded into gram entries.
//!
//! Per iteration the solver precomputes
//!
//! ```text
//! s_ic = Σ_j a_jc K_ij            (N × k)
//! Q_ct = Σ_j Σ_g a_jc a_gt K_jg   (k × k)
//! ```
//!
//! after which `‖φ(x_i) − im(φ(x_i))‖² = K_ii − (2/L) Σ_{c∈A} s_ic + (1/L²) Σ_{c,t∈A} Q_ct`
//! costs O(|A|²) per object. The factorization is exact.

use rayon::prelude::*;

use crate::config::{ClusteringResult, SolverConfig};
use crate::error::{OkmError, Result};
use crate::kernels::{gram, psd_check, GramMatrix};
use crate::model::{cluster_weights, membership_weights, DataMatrix, MembershipMatrix, WeightVector};
use crate::solver::{self, Geometry};

/// Absolute PSD tolerance, scaled by the largest diagonal entry (at least 1).
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Coefficients of one cluster's prototype over the training objects.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitPrototype {
    pub coefficients: Vec<f64>,
}

pub fn implicit_prototypes(
    p: &MembershipMatrix,
    w: &WeightVector,
    big_w: &[f64],
) -> Result<Vec<ImplicitPrototype>> {
    (0..p.k())
        .map(|c| {
            if big_w[c] <= 0.0 {
                return Err(OkmError::EmptyCluster { cluster: c });
            }
            let coefficients = (0..p.n())
                .map(|j| if p.get(j, c) { w[j] / big_w[c] } else { 0.0 })
                .collect();
            Ok(ImplicitPrototype { coefficients })
        })
        .collect()
}

fn check_sizes(k: &GramMatrix, p: &MembershipMatrix) -> Result<()> {
    if k.n() != p.n() {
        return Err(OkmError::DimensionMismatch {
            expected: k.n(),
            found: p.n(),
        });
    }
    Ok(())
}

fn coefficient(p: &MembershipMatrix, w: &WeightVector, big_w: &[f64], j: usize, c: usize) -> Result<f64> {
    if big_w[c] <= 0.0 {
        return Err(OkmError::EmptyCluster { cluster: c });
    }
    Ok(if p.get(j, c) { w[j] / big_w[c] } else { 0.0 })
}

/// `‖φ(x_i) − m_c^φ‖²`, evaluated directly from the gram matrix in O(N²).
pub fn dist_to_prototype(
    k: &GramMatrix,
    i: usize,
    c: usize,
    p: &MembershipMatrix,
    w: &WeightVector,
    big_w: &[f64],
) -> Result<f64> {
    dist_to_image(k, i, &[c], p, w, big_w)
}

/// `‖φ(x_i) − (1/|A|) Σ_{c∈A} m_c^φ‖²`, evaluated directly in O(|A|² N²).
pub fn dist_to_image(
    k: &GramMatrix,
    i: usize,
    clusters: &[usize],
    p: &MembershipMatrix,
    w: &WeightVector,
    big_w: &[f64],
) -> Result<f64> {
    check_sizes(k, p)?;
    if clusters.is_empty() {
        return Err(OkmError::Coverage { row: i });
    }
    let n = p.n();
    let l = clusters.len() as f64;
    let mut cross = 0.0;
    for &c in clusters {
        for j in 0..n {
            cross += coefficient(p, w, big_w, j, c)? * k.get(i, j);
        }
    }
    let mut quad = 0.0;
    for &c in clusters {
        for &t in clusters {
            for j in 0..n {
                let a = coefficient(p, w, big_w, j, c)?;
                if a == 0.0 {
                    continue;
                }
                for g in 0..n {
                    quad += a * coefficient(p, w, big_w, g, t)? * k.get(j, g);
                }
            }
        }
    }
    Ok(k.get(i, i) - 2.0 / l * cross + quad / (l * l))
}

/// Per-iteration aggregates; see the module docs.
#[derive(Debug, Clone)]
pub struct KernelState {
    k: usize,
    diag: Vec<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
}

impl KernelState {
    pub fn new(gram: &GramMatrix, p: &MembershipMatrix, w: &WeightVector, big_w: &[f64]) -> Result<Self> {
        check_sizes(gram, p)?;
        let protos = implicit_prototypes(p, w, big_w)?;
        let n = p.n();
        let k = p.k();
        let members: Vec<Vec<usize>> = (0..k).map(|c| p.members(c)).collect();

        let s: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let row = gram.row(i);
                let members = &members;
                let protos = &protos;
                (0..k).map(move |c| {
                    members[c]
                        .iter()
                        .map(|&j| protos[c].coefficients[j] * row[j])
                        .sum::<f64>()
                })
            })
            .collect();

        let mut q = vec![0.0; k * k];
        for c in 0..k {
            for t in c..k {
                let v: f64 = members[c]
                    .iter()
                    .map(|&j| protos[c].coefficients[j] * s[j * k + t])
                    .sum();
                q[c * k + t] = v;
                q[t * k + c] = v;
            }
        }
        let diag = (0..n).map(|i| gram.get(i, i)).collect();
        Ok(Self { k, diag, s, q })
    }

    pub fn from_membership(gram: &GramMatrix, p: &MembershipMatrix) -> Result<Self> {
        let w = membership_weights(p)?;
        let big_w = cluster_weights(p, &w);
        Self::new(gram, p, &w, &big_w)
    }

    pub fn dist_to_prototype(&self, i: usize, c: usize) -> f64 {
        self.diag[i] - 2.0 * self.s[i * self.k + c] + self.q[c * self.k + c]
    }

    pub fn dist_to_image(&self, i: usize, clusters: &[usize]) -> f64 {
        let l = clusters.len() as f64;
        let cross: f64 = clusters.iter().map(|&c| self.s[i * self.k + c]).sum();
        let mut quad = 0.0;
        for &c in clusters {
            for &t in clusters {
                quad += self.q[c * self.k + t];
            }
        }
        self.diag[i] - 2.0 / l * cross + quad / (l * l)
    }
}

pub fn objective_kernel(k: &GramMatrix, p: &MembershipMatrix) -> Result<f64> {
    let st = KernelState::from_membership(k, p)?;
    Ok((0..p.n()).map(|i| st.dist_to_image(i, &p.clusters_of(i))).sum())
}

/// New cluster set for object `i`; same greedy rule as [`crate::okm::assign_object`].
pub fn assign_object_kernel(
    k: &GramMatrix,
    i: usize,
    p: &MembershipMatrix,
    w: &WeightVector,
    big_w: &[f64],
    max_clusters: Option<usize>,
) -> Result<Vec<usize>> {
    let st = KernelState::new(k, p, w, big_w)?;
    Ok(solver::greedy_prefix(
        p.k(),
        &p.clusters_of(i),
        max_clusters.unwrap_or(p.k()),
        |c| st.dist_to_prototype(i, c),
        |set| st.dist_to_image(i, set),
    ))
}

pub(crate) struct FeatureSpace<'a> {
    gram: &'a GramMatrix,
}

impl Geometry for FeatureSpace<'_> {
    type State = KernelState;

    fn n(&self) -> usize {
        self.gram.n()
    }

    fn state(&self, p: &MembershipMatrix) -> Result<KernelState> {
        KernelState::from_membership(self.gram, p)
    }

    fn dist_to_prototype(&self, st: &KernelState, i: usize, c: usize) -> f64 {
        st.dist_to_prototype(i, c)
    }

    fn dist_to_image(&self, st: &KernelState, i: usize, clusters: &[usize]) -> f64 {
        st.dist_to_image(i, clusters)
    }
}

pub fn gram_is_psd(k: &GramMatrix) -> bool {
    let scale = (0..k.n()).fold(1.0f64, |m, i| m.max(k.get(i, i).abs()));
    psd_check(k, PSD_TOLERANCE * scale)
}

/// Run OKM-K on a precomputed gram matrix. `config.kernel` is not consulted.
pub fn solve_kernel(
    k: &GramMatrix,
    config: &SolverConfig,
    init: Option<&MembershipMatrix>,
) -> Result<ClusteringResult> {
    let mut result = solver::run(&FeatureSpace { gram: k }, config, init)?;
    let psd = gram_is_psd(k);
    if !psd {
        log::debug!("gram matrix is not positive semidefinite; feature-space distances may be negative");
    }
    result.psd_ok = Some(psd);
    Ok(result)
}

/// Build the gram matrix of `config.kernel` over `data`, then run [`solve_kernel`].
pub fn solve_kernel_features(
    data: &DataMatrix,
    config: &SolverConfig,
    init: Option<&MembershipMatrix>,
) -> Result<ClusteringResult> {
    config.validate()?;
    let k = gram(&config.kernel, data)?;
    solve_kernel(&k, config, init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitPolicy;
    use crate::kernels::KernelSpec;
    use crate::okm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataMatrix {
        let values = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        DataMatrix::new(n, d, values).unwrap()
    }

    fn random_membership(rng: &mut ChaCha8Rng, n: usize, k: usize) -> MembershipMatrix {
        let lists: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut l: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.35)).collect();
                if i < k {
                    l.push(i);
                } else if l.is_empty() {
                    l.push(rng.random_range(0..k));
                }
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        MembershipMatrix::from_cluster_lists(&lists, k).unwrap()
    }

    fn weights(p: &MembershipMatrix) -> (WeightVector, Vec<f64>) {
        let w = membership_weights(p).unwrap();
        let big_w = cluster_weights(p, &w);
        (w, big_w)
    }

    #[test]
    fn implicit_prototypes_are_convex_combinations_of_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_membership(&mut rng, 12, 4);
        let (w, big_w) = weights(&p);
        for (c, proto) in implicit_prototypes(&p, &w, &big_w).unwrap().iter().enumerate() {
            let sum: f64 = proto.coefficients.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (j, &a) in proto.coefficients.iter().enumerate() {
                assert!(a >= 0.0);
                assert_eq!(a > 0.0, p.get(j, c));
            }
        }
    }

    #[test]
    fn own_singleton_cluster_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_data(&mut rng, 4, 2);
        let k = gram(&KernelSpec::rbf(1.0), &data).unwrap();
        let p = MembershipMatrix::from_labels(&[0, 1, 2, 2], 3).unwrap();
        let (w, big_w) = weights(&p);
        assert!(dist_to_prototype(&k, 0, 0, &p, &w, &big_w).unwrap().abs() < 1e-15);
        assert!(dist_to_image(&k, 1, &[1], &p, &w, &big_w).unwrap().abs() < 1e-15);
        // singleton cluster {1} seen from object 0: 2 − 2K_01 for RBF
        let d = dist_to_prototype(&k, 0, 1, &p, &w, &big_w).unwrap();
        assert!((d - (2.0 - 2.0 * k.get(0, 1))).abs() < 1e-14);
    }

    #[test]
    fn single_cluster_image_equals_prototype_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_data(&mut rng, 9, 3);
        let k = gram(&KernelSpec::rbf(1.5), &data).unwrap();
        let p = random_membership(&mut rng, 9, 3);
        let (w, big_w) = weights(&p);
        for i in 0..9 {
            for c in 0..3 {
                let a = dist_to_image(&k, i, &[c], &p, &w, &big_w).unwrap();
                let b = dist_to_prototype(&k, i, c, &p, &w, &big_w).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn aggregates_match_direct_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_data(&mut rng, 10, 3);
        let k = gram(&KernelSpec::polynomial(2.0), &data).unwrap();
        let p = random_membership(&mut rng, 10, 3);
        let (w, big_w) = weights(&p);
        let st = KernelState::new(&k, &p, &w, &big_w).unwrap();
        let sets: [&[usize]; 4] = [&[0], &[1, 2], &[0, 2], &[0, 1, 2]];
        for i in 0..10 {
            for c in 0..3 {
                let direct = dist_to_prototype(&k, i, c, &p, &w, &big_w).unwrap();
                assert!((st.dist_to_prototype(i, c) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            }
            for set in sets {
                let direct = dist_to_image(&k, i, set, &p, &w, &big_w).unwrap();
                assert!((st.dist_to_image(i, set) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn linear_kernel_distances_match_input_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_data(&mut rng, 10, 4);
        let k = gram(&KernelSpec::Linear, &data).unwrap();
        let p = random_membership(&mut rng, 10, 3);
        let (w, big_w) = weights(&p);
        let m = okm::prototypes(&data, &p, &w).unwrap();
        for i in 0..10 {
            for c in 0..3 {
                let explicit: f64 = data
                    .row(i)
                    .iter()
                    .zip(m.center(c))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let implicit = dist_to_prototype(&k, i, c, &p, &w, &big_w).unwrap();
                assert!((explicit - implicit).abs() < 1e-10);
            }
            let im = okm::image(i, &p, &m);
            let explicit: f64 = data.row(i).iter().zip(&im).map(|(a, b)| (a - b) * (a - b)).sum();
            let implicit = dist_to_image(&k, i, &p.clusters_of(i), &p, &w, &big_w).unwrap();
            assert!((explicit - implicit).abs() < 1e-10);
        }
        let j_in = okm::objective(&data, &p, &m).unwrap();
        let j_k = objective_kernel(&k, &p).unwrap();
        assert!((j_in - j_k).abs() <= 1e-9 * j_in.abs());
    }

    #[test]
    fn objective_is_zero_for_own_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_data(&mut rng, 5, 2);
        let p = MembershipMatrix::from_labels(&[0, 1, 2, 3, 4], 5).unwrap();
        for spec in [KernelSpec::Linear, KernelSpec::rbf(0.5), KernelSpec::polynomial(3.0)] {
            let k = gram(&spec, &data).unwrap();
            assert!(objective_kernel(&k, &p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn single_cluster_assignment_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_data(&mut rng, 6, 2);
        let k = gram(&KernelSpec::rbf(1.0), &data).unwrap();
        let p = MembershipMatrix::from_labels(&[0; 6], 1).unwrap();
        let (w, big_w) = weights(&p);
        for i in 0..6 {
            assert_eq!(assign_object_kernel(&k, i, &p, &w, &big_w, None).unwrap(), vec![0]);
        }
    }

    #[test]
    fn empty_cluster_is_reported() {
        let k = GramMatrix::from_values(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let p = MembershipMatrix::from_labels(&[0, 0], 2).unwrap();
        let (w, big_w) = weights(&p);
        assert!(matches!(
            dist_to_prototype(&k, 0, 1, &p, &w, &big_w),
            Err(OkmError::EmptyCluster { cluster: 1 })
        ));
        assert!(matches!(objective_kernel(&k, &p), Err(OkmError::EmptyCluster { cluster: 1 })));
    }

    #[test]
    fn solve_reports_psd_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_data(&mut rng, 15, 2);
        let config = SolverConfig::new(2).with_kernel(KernelSpec::rbf(1.0)).with_seed(3);
        let res = solve_kernel_features(&data, &config, None).unwrap();
        assert_eq!(res.psd_ok, Some(true));

        // indefinite gram still runs; distances are used raw
        let bad = GramMatrix::from_values(
            4,
            vec![1.0, 2.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.3, 0.0, 0.0, 0.3, 1.0],
        )
        .unwrap();
        let init = MembershipMatrix::from_labels(&[0, 0, 1, 1], 2).unwrap();
        let cfg = SolverConfig::new(2).with_init(InitPolicy::ProvidedMembership);
        let res = solve_kernel(&bad, &cfg, Some(&init)).unwrap();
        assert_eq!(res.psd_ok, Some(false));
    }
}
