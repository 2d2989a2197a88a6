//! Alternating optimization shared by the input-space and kernel solvers.
//!
//! Each iteration freezes the prototypes implied by the current membership,
//! reassigns every object against them (Jacobi style, in parallel), repairs
//! any cluster left empty, then evaluates the objective of the new membership
//! with its own prototypes. A batch whose objective is worse than the current
//! one is rejected and the run stops on the retained state.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ClusteringResult, ConvergedBy, InitPolicy, SolverConfig};
use crate::error::{OkmError, Result};
use crate::model::{coverage_check, MembershipMatrix};

/// Distance model for one solver. `State` holds whatever the membership
/// implies about the prototypes (explicit centers or kernel aggregates).
pub(crate) trait Geometry: Sync {
    type State: Sync;

    fn n(&self) -> usize;

    fn state(&self, p: &MembershipMatrix) -> Result<Self::State>;

    /// Squared distance from object `i` to the prototype of cluster `c`.
    fn dist_to_prototype(&self, st: &Self::State, i: usize, c: usize) -> f64;

    /// Squared distance from object `i` to the mean of the prototypes in `clusters`.
    fn dist_to_image(&self, st: &Self::State, i: usize, clusters: &[usize]) -> f64;
}

/// Clusters in ascending prototype distance; ties go to the lower index.
pub(crate) fn sorted_clusters(k: usize, proto_dist: impl Fn(usize) -> f64) -> Vec<usize> {
    let dists: Vec<f64> = (0..k).map(proto_dist).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    order
}

/// Sorted-prefix assignment with keep-if-not-better.
///
/// Walks the clusters in ascending prototype distance and scores every
/// prefix (up to `limit` clusters) by image distance; a longer prefix wins
/// only on strict improvement. The image distance of a prefix is not
/// unimodal in its length, so the scan does not stop at the first
/// non-improving step. The winning prefix replaces `current` only if its
/// image distance is no larger. Returns ascending ids.
pub(crate) fn greedy_prefix(
    k: usize,
    current: &[usize],
    limit: usize,
    proto_dist: impl Fn(usize) -> f64,
    image_dist: impl Fn(&[usize]) -> f64,
) -> Vec<usize> {
    let order = sorted_clusters(k, proto_dist);
    let mut best_len = 1;
    let mut best = image_dist(&order[..1]);
    for len in 2..=limit.clamp(1, k) {
        let d = image_dist(&order[..len]);
        if d < best {
            best = d;
            best_len = len;
        }
    }
    if !current.is_empty() && best > image_dist(current) {
        return current.to_vec();
    }
    let mut chosen = order[..best_len].to_vec();
    chosen.sort_unstable();
    chosen
}

pub(crate) fn objective<G: Geometry>(geom: &G, st: &G::State, p: &MembershipMatrix) -> f64 {
    (0..p.n())
        .map(|i| geom.dist_to_image(st, i, &p.clusters_of(i)))
        .sum()
}

pub(crate) fn assign_object<G: Geometry>(
    geom: &G,
    st: &G::State,
    i: usize,
    p: &MembershipMatrix,
    limit: usize,
) -> Vec<usize> {
    greedy_prefix(
        p.k(),
        &p.clusters_of(i),
        limit,
        |c| geom.dist_to_prototype(st, i, c),
        |set| geom.dist_to_image(st, i, set),
    )
}

fn assign_all<G: Geometry>(
    geom: &G,
    st: &G::State,
    p: &MembershipMatrix,
    limit: usize,
) -> MembershipMatrix {
    let rows: Vec<Vec<usize>> = (0..p.n())
        .into_par_iter()
        .map(|i| assign_object(geom, st, i, p, limit))
        .collect();
    let mut next = MembershipMatrix::empty(p.n(), p.k());
    for (i, row) in rows.iter().enumerate() {
        next.set_row(i, row);
    }
    next
}

/// Refill empty clusters. Each empty cluster receives, as a singleton, the
/// object with the largest image distance (under the frozen state) among
/// those whose removal empties no other cluster.
pub(crate) fn repair_empty_clusters<G: Geometry>(
    geom: &G,
    st: &G::State,
    p: &mut MembershipMatrix,
) -> Result<()> {
    let mut moved = vec![false; p.n()];
    while let Some(empty) = p.first_empty_cluster() {
        let sizes: Vec<usize> = (0..p.k()).map(|c| p.cluster_size(c)).collect();
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..p.n() {
            if moved[i] {
                continue;
            }
            let clusters = p.clusters_of(i);
            if clusters.iter().any(|&c| sizes[c] < 2) {
                continue;
            }
            let d = geom.dist_to_image(st, i, &clusters);
            if pick.is_none_or(|(_, best)| d > best) {
                pick = Some((i, d));
            }
        }
        let (i, _) = pick.ok_or(OkmError::EmptyCluster { cluster: empty })?;
        log::debug!("refilling empty cluster {empty} with object {i}");
        p.set_row(i, &[empty]);
        moved[i] = true;
    }
    Ok(())
}

const MAX_SINGLETON_DRAWS: usize = 10_000;

/// Random one-cluster-per-object membership with every cluster nonempty.
///
/// Labels are drawn uniformly and redrawn until all `k` clusters are hit;
/// after `MAX_SINGLETON_DRAWS` failures, `k` distinct random objects seed the
/// clusters and the rest stay uniform.
pub fn random_singleton(n: usize, k: usize, seed: u64) -> Result<MembershipMatrix> {
    if k == 0 {
        return Err(OkmError::InvalidConfig("k must be at least 1".into()));
    }
    if n < k {
        return Err(OkmError::EmptyCluster { cluster: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0usize; n];
    for _ in 0..MAX_SINGLETON_DRAWS {
        let mut hit = vec![false; k];
        for label in labels.iter_mut() {
            *label = rng.random_range(0..k);
            hit[*label] = true;
        }
        if hit.iter().all(|&h| h) {
            return MembershipMatrix::from_labels(&labels, k);
        }
    }
    let mut objects: Vec<usize> = (0..n).collect();
    objects.shuffle(&mut rng);
    for (c, &i) in objects.iter().take(k).enumerate() {
        labels[i] = c;
    }
    MembershipMatrix::from_labels(&labels, k)
}

pub(crate) fn initial_membership(
    config: &SolverConfig,
    n: usize,
    init: Option<&MembershipMatrix>,
) -> Result<MembershipMatrix> {
    match (config.init, init) {
        (InitPolicy::RandomSingleton, None) => random_singleton(n, config.k, config.seed),
        (InitPolicy::RandomSingleton, Some(_)) => Err(OkmError::InvalidConfig(
            "an initial membership was supplied but the init policy is random_singleton".into(),
        )),
        (InitPolicy::ProvidedMembership, None) => Err(OkmError::InvalidConfig(
            "init policy provided_membership requires an initial membership".into(),
        )),
        (InitPolicy::ProvidedMembership, Some(p)) => {
            if p.n() != n {
                return Err(OkmError::DimensionMismatch {
                    expected: n,
                    found: p.n(),
                });
            }
            if p.k() != config.k {
                return Err(OkmError::InvalidConfig(format!(
                    "initial membership has {} clusters, config expects {}",
                    p.k(),
                    config.k
                )));
            }
            if !coverage_check(p) {
                let row = (0..n).find(|&i| p.multiplicity(i) == 0).unwrap_or(0);
                return Err(OkmError::Coverage { row });
            }
            if let Some(cluster) = p.first_empty_cluster() {
                return Err(OkmError::EmptyCluster { cluster });
            }
            Ok(p.clone())
        }
    }
}

pub(crate) fn run<G: Geometry>(
    geom: &G,
    config: &SolverConfig,
    init: Option<&MembershipMatrix>,
) -> Result<ClusteringResult> {
    config.validate()?;
    let limit = config.assignment_limit();
    let mut p = initial_membership(config, geom.n(), init)?;
    let mut st = geom.state(&p)?;
    let initial_objective = objective(geom, &st, &p);

    let mut current = initial_objective;
    let mut trace = Vec::with_capacity(config.max_iter);
    let mut converged_by = ConvergedBy::MaxIter;

    for iteration in 0..config.max_iter {
        let mut next = assign_all(geom, &st, &p, limit);
        repair_empty_clusters(geom, &st, &mut next)?;
        let next_state = geom.state(&next)?;
        let candidate = objective(geom, &next_state, &next);

        let accepted = candidate <= current;
        let value = if accepted { candidate } else { current };
        let unchanged = !accepted || next == p;
        if accepted {
            p = next;
            st = next_state;
        } else {
            log::debug!(
                "iteration {iteration}: batch raised objective {current} -> {candidate}, kept previous"
            );
        }
        let improvement = (current - value) / current.max(f64::EPSILON);
        trace.push(value);
        current = value;
        if unchanged || improvement < config.min_improvement {
            converged_by = ConvergedBy::ImprovementThreshold;
            break;
        }
    }

    Ok(ClusteringResult {
        memberships: p,
        iterations_run: trace.len(),
        objective_trace: trace,
        initial_objective,
        converged_by,
        psd_ok: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_image(centers: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
        move |set: &[usize]| {
            let m: f64 = set.iter().map(|&c| centers[c]).sum::<f64>() / set.len() as f64;
            m * m
        }
    }

    #[test]
    fn greedy_scans_past_a_worse_prefix() {
        // x = 0; prefixes {1} -> 1, {1, 1.5} -> 1.5625, {1, 1.5, -3.5} -> 1/9
        let centers = [1.0f64, 1.5, -3.5];
        let got = greedy_prefix(3, &[], 3, |c| centers[c].abs(), mean_image(&centers));
        assert_eq!(got, vec![0, 1, 2]);
        let capped = greedy_prefix(3, &[], 2, |c| centers[c].abs(), mean_image(&centers));
        assert_eq!(capped, vec![0]);
    }

    #[test]
    fn greedy_prefers_shorter_prefix_on_ties() {
        // x = 0 between centers -1 and 1 at equal distance, third far away
        let centers = [-1.0f64, 1.0, 9.0];
        let got = greedy_prefix(3, &[], 3, |c| centers[c].abs(), mean_image(&centers));
        assert_eq!(got, vec![0, 1]);
        let image = |_: &[usize]| 2.0;
        assert_eq!(greedy_prefix(3, &[], 3, |c| c as f64, image), vec![0]);
    }

    #[test]
    fn greedy_does_not_join_a_worse_pair() {
        // 1-D, x = 0, centers 0 and 2: adding the second cluster moves the image to 1
        let centers = [0.0f64, 2.0];
        let got = greedy_prefix(
            2,
            &[],
            2,
            |c| centers[c] * centers[c],
            |set| {
                let m: f64 = set.iter().map(|&c| centers[c]).sum::<f64>() / set.len() as f64;
                m * m
            },
        );
        assert_eq!(got, vec![0]);
    }

    #[test]
    fn greedy_keeps_previous_row_when_better() {
        let image = |set: &[usize]| if set == [2] { 0.1 } else { 5.0 };
        let got = greedy_prefix(3, &[2], 3, |c| c as f64, image);
        assert_eq!(got, vec![2]);
    }

    #[test]
    fn greedy_respects_limit() {
        let centers = [-1.0f64, 1.0];
        let image = |set: &[usize]| {
            let m: f64 = set.iter().map(|&c| centers[c]).sum::<f64>() / set.len() as f64;
            m * m
        };
        assert_eq!(greedy_prefix(2, &[], 2, |c| centers[c].abs() + c as f64 * 1e-3, image), vec![0, 1]);
        assert_eq!(greedy_prefix(2, &[], 1, |c| centers[c].abs() + c as f64 * 1e-3, image), vec![0]);
    }

    #[test]
    fn sorted_clusters_break_ties_by_index() {
        assert_eq!(sorted_clusters(4, |c| [1.0, 0.5, 0.5, 0.0][c]), vec![3, 1, 2, 0]);
    }

    #[test]
    fn random_singleton_covers_every_cluster() {
        for seed in 0..20 {
            let p = random_singleton(9, 4, seed).unwrap();
            assert!(coverage_check(&p));
            assert!(p.first_empty_cluster().is_none());
            assert!((0..9).all(|i| p.multiplicity(i) == 1));
        }
        assert_eq!(random_singleton(9, 4, 7).unwrap(), random_singleton(9, 4, 7).unwrap());
        // N = k = 20 essentially never succeeds by redrawing; the fallback kicks in
        let p = random_singleton(20, 20, 1).unwrap();
        assert!(p.first_empty_cluster().is_none());
    }

    #[test]
    fn random_singleton_needs_enough_objects() {
        assert!(matches!(
            random_singleton(2, 3, 0),
            Err(OkmError::EmptyCluster { .. })
        ));
    }
}
