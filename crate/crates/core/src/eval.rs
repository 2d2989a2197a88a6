//! Pair-counting precision, recall and F-measure for overlapping clusterings.
//!
//! A pair of objects is *linked* when the two share at least one cluster
//! (prediction) or at least one class (ground truth). Precision and recall
//! are taken over linked pairs. Both sides may be overlapping covers, so no
//! cluster-to-class matching is needed.

use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};
use crate::model::MembershipMatrix;

/// Multi-label ground truth: one nonempty set of class ids per object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSets {
    sets: Vec<Vec<usize>>,
}

impl LabelSets {
    /// Sorts and deduplicates each set; rejects empty ones.
    pub fn new(mut sets: Vec<Vec<usize>>) -> Result<Self> {
        for (i, set) in sets.iter_mut().enumerate() {
            if set.is_empty() {
                return Err(OkmError::InvalidData(format!("object {i} has no label")));
            }
            set.sort_unstable();
            set.dedup();
        }
        Ok(Self { sets })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Number of distinct class ids (max id + 1).
    pub fn class_count(&self) -> usize {
        self.sets.iter().flatten().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairConfusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl PairConfusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

fn shares_any(a: &[usize], b: &[usize]) -> bool {
    // both ascending
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

pub fn pair_confusion(predicted: &MembershipMatrix, truth: &LabelSets) -> Result<PairConfusion> {
    if predicted.n() != truth.len() {
        return Err(OkmError::DimensionMismatch {
            expected: truth.len(),
            found: predicted.n(),
        });
    }
    let clusters = predicted.cluster_lists();
    if let Some(row) = clusters.iter().position(Vec::is_empty) {
        return Err(OkmError::Coverage { row });
    }
    let mut pc = PairConfusion::default();
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let linked = shares_any(&clusters[i], &clusters[j]);
            let true_linked = shares_any(truth.get(i), truth.get(j));
            match (linked, true_linked) {
                (true, true) => pc.tp += 1,
                (true, false) => pc.fp += 1,
                (false, true) => pc.fn_ += 1,
                (false, false) => pc.tn += 1,
            }
        }
    }
    Ok(pc)
}

/// Precision and recall default to 1 on an empty denominator; F is 0 when
/// both are 0.
pub fn precision_recall_f(pc: &PairConfusion) -> Scores {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(pc.tp, pc.tp + pc.fp);
    let recall = ratio(pc.tp, pc.tp + pc.fn_);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f,
    }
}

pub fn evaluate(predicted: &MembershipMatrix, truth: &LabelSets) -> Result<Scores> {
    pair_confusion(predicted, truth).map(|pc| precision_recall_f(&pc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truth(sets: &[&[usize]]) -> LabelSets {
        LabelSets::new(sets.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn perfect_prediction_has_no_errors() {
        let t = truth(&[&[0], &[0, 1], &[1], &[2]]);
        let p = MembershipMatrix::from_cluster_lists(t.sets(), 3).unwrap();
        let pc = pair_confusion(&p, &t).unwrap();
        assert_eq!((pc.fp, pc.fn_), (0, 0));
        let s = precision_recall_f(&pc);
        assert_eq!((s.precision, s.recall, s.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_singletons_link_nothing() {
        let t = truth(&[&[0], &[0], &[1], &[0, 1]]);
        let p = MembershipMatrix::from_labels(&[0, 1, 2, 3], 4).unwrap();
        let pc = pair_confusion(&p, &t).unwrap();
        assert_eq!(pc.tp, 0);
        assert_eq!(pc.fp, 0);
        // true-linked pairs: (0,1) (0,3) (1,3) (2,3)
        assert_eq!(pc.fn_, 4);
        assert_eq!(pc.total(), 6);
    }

    #[test]
    fn scores_from_counts() {
        let s = precision_recall_f(&PairConfusion {
            tp: 1,
            fp: 1,
            fn_: 3,
            tn: 0,
        });
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 0.25);
        assert!((s.f - 1.0 / 3.0).abs() < 1e-15);
        let zero = precision_recall_f(&PairConfusion {
            tp: 0,
            fp: 2,
            fn_: 2,
            tn: 0,
        });
        assert_eq!(zero.f, 0.0);
    }

    #[test]
    fn size_mismatch_and_empty_labels_rejected() {
        let t = truth(&[&[0], &[1]]);
        let p = MembershipMatrix::from_labels(&[0, 0, 1], 2).unwrap();
        assert!(pair_confusion(&p, &t).is_err());
        assert!(LabelSets::new(vec![vec![0], vec![]]).is_err());
    }

    fn cover(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(proptest::collection::btree_set(0..k, 1..=k), n)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling(
            (pred, tru) in (2usize..12).prop_flat_map(|n| (cover(n, 4), cover(n, 3)))
        ) {
            let t = LabelSets::new(tru.clone()).unwrap();
            let p = MembershipMatrix::from_cluster_lists(&pred, 4).unwrap();
            let base = pair_confusion(&p, &t).unwrap();
            let p2 = p.permute_clusters(&[2, 0, 3, 1]);
            let t2 = LabelSets::new(
                tru.iter().map(|s| s.iter().map(|&c| (c + 1) % 3).collect()).collect()
            ).unwrap();
            prop_assert_eq!(pair_confusion(&p2, &t2).unwrap(), base);
        }

        #[test]
        fn harmonic_mean_bounds(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
            let s = precision_recall_f(&PairConfusion { tp, fp, fn_, tn: 0 });
            prop_assert!((0.0..=1.0).contains(&s.precision));
            prop_assert!((0.0..=1.0).contains(&s.recall));
            if s.precision + s.recall > 0.0 {
                prop_assert!(s.f >= s.precision.min(s.recall) - 1e-15);
                prop_assert!(s.f <= s.precision.max(s.recall) + 1e-15);
            }
        }

        #[test]
        fn duplicating_an_object_never_lowers_tp(
            (pred, tru, pick) in (2usize..10).prop_flat_map(|n| (cover(n, 3), cover(n, 3), 0..n))
        ) {
            let t = LabelSets::new(tru.clone()).unwrap();
            let p = MembershipMatrix::from_cluster_lists(&pred, 3).unwrap();
            let before = pair_confusion(&p, &t).unwrap().tp;
            let (mut pred2, mut tru2) = (pred.clone(), tru.clone());
            pred2.push(pred[pick].clone());
            tru2.push(tru[pick].clone());
            let t2 = LabelSets::new(tru2).unwrap();
            let p2 = MembershipMatrix::from_cluster_lists(&pred2, 3).unwrap();
            prop_assert!(pair_confusion(&p2, &t2).unwrap().tp >= before);
        }
    }
}
