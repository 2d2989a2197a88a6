//! Dataset and membership bookkeeping shared by both solvers.
//!
//! A [`MembershipMatrix`] is the binary N × k matrix `P`. Everything the
//! objective needs about an object's assignments derives from it: the set of
//! clusters `A_i` holding object `i`, its multiplicity `L_i = |A_i|`, the
//! per-object weight `w_i = 1 / L_i²` and the per-cluster total weight
//! `W_c = Σ_j P_jc w_j`.

use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};

/// N objects × d numeric features, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Build from a row-major buffer. Rejects empty shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(OkmError::InvalidData(format!(
                "data matrix must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(OkmError::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(OkmError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(OkmError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }
}

/// Binary N × k membership matrix `P`.
///
/// Construction does not enforce coverage; operations that need it check it
/// and report [`OkmError::Coverage`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MembershipMatrix {
    n: usize,
    k: usize,
    bits: Vec<bool>,
}

impl MembershipMatrix {
    /// All-zero matrix.
    pub fn empty(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            bits: vec![false; n * k],
        }
    }

    /// One cluster per object.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut p = Self::empty(labels.len(), k);
        for (i, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(OkmError::InvalidData(format!(
                    "object {i}: cluster id {c} out of range for k = {k}"
                )));
            }
            p.set(i, c, true);
        }
        Ok(p)
    }

    /// Build from per-object cluster-id lists.
    pub fn from_cluster_lists(lists: &[Vec<usize>], k: usize) -> Result<Self> {
        let mut p = Self::empty(lists.len(), k);
        for (i, list) in lists.iter().enumerate() {
            for &c in list {
                if c >= k {
                    return Err(OkmError::InvalidData(format!(
                        "object {i}: cluster id {c} out of range for k = {k}"
                    )));
                }
                p.set(i, c, true);
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, c: usize) -> bool {
        self.bits[i * self.k + c]
    }

    pub fn set(&mut self, i: usize, c: usize, value: bool) {
        self.bits[i * self.k + c] = value;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.k..(i + 1) * self.k]
    }

    /// Replace row `i` with exactly the clusters listed.
    pub fn set_row(&mut self, i: usize, clusters: &[usize]) {
        let row = &mut self.bits[i * self.k..(i + 1) * self.k];
        row.fill(false);
        for &c in clusters {
            row[c] = true;
        }
    }

    /// `A_i`: the clusters holding object `i`, ascending.
    pub fn clusters_of(&self, i: usize) -> Vec<usize> {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(c, &b)| b.then_some(c))
            .collect()
    }

    /// `L_i = Σ_c P_ic`.
    pub fn multiplicity(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    /// Members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i, c)).collect()
    }

    pub fn cluster_size(&self, c: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, c)).count()
    }

    pub fn cluster_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.clusters_of(i)).collect()
    }

    /// First cluster with no member, if any.
    pub fn first_empty_cluster(&self) -> Option<usize> {
        (0..self.k).find(|&c| self.cluster_size(c) == 0)
    }

    /// Relabel clusters: old cluster `c` becomes `perm[c]`.
    pub fn permute_clusters(&self, perm: &[usize]) -> Self {
        let mut out = Self::empty(self.n, self.k);
        for i in 0..self.n {
            for c in 0..self.k {
                if self.get(i, c) {
                    out.set(i, perm[c], true);
                }
            }
        }
        out
    }
}

/// Per-object weights `w_j = 1 / L_j²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Scaled copy; used to check linearity of [`cluster_weights`].
    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|w| w * alpha).collect())
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// True iff every object belongs to at least one cluster.
pub fn coverage_check(p: &MembershipMatrix) -> bool {
    (0..p.n()).all(|i| p.row(i).iter().any(|&b| b))
}

pub fn membership_weights(p: &MembershipMatrix) -> Result<WeightVector> {
    (0..p.n())
        .map(|j| match p.multiplicity(j) {
            0 => Err(OkmError::Coverage { row: j }),
            l => Ok(1.0 / (l * l) as f64),
        })
        .collect::<Result<Vec<_>>>()
        .map(WeightVector)
}

/// `W_c = Σ_j P_jc w_j` for every cluster.
pub fn cluster_weights(p: &MembershipMatrix, w: &WeightVector) -> Vec<f64> {
    let mut totals = vec![0.0; p.k()];
    for j in 0..p.n() {
        for (c, total) in totals.iter_mut().enumerate() {
            if p.get(j, c) {
                *total += w[j];
            }
        }
    }
    totals
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights_follow_inverse_square_multiplicity() {
        let p = MembershipMatrix::from_cluster_lists(&[vec![0], vec![0, 1], vec![0, 1, 2]], 3)
            .unwrap();
        let w = membership_weights(&p).unwrap();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 0.25);
        assert_eq!(w[2], 1.0 / 9.0);
    }

    #[test]
    fn weights_reject_uncovered_row() {
        let p = MembershipMatrix::from_cluster_lists(&[vec![0], vec![]], 2).unwrap();
        assert!(matches!(
            membership_weights(&p),
            Err(OkmError::Coverage { row: 1 })
        ));
    }

    #[test]
    fn cluster_weights_small_cases() {
        let p = MembershipMatrix::from_labels(&[0, 0, 0, 1], 2).unwrap();
        let w = membership_weights(&p).unwrap();
        assert_eq!(cluster_weights(&p, &w), vec![3.0, 1.0]);

        // cluster 1's only member also belongs to cluster 0
        let p = MembershipMatrix::from_cluster_lists(&[vec![0], vec![0, 1]], 2).unwrap();
        let w = membership_weights(&p).unwrap();
        assert_eq!(cluster_weights(&p, &w)[1], 0.25);
    }

    #[test]
    fn cluster_weights_match_double_loop_on_random_membership() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (n, k) = (8, 3);
        let mut lists = Vec::new();
        for _ in 0..n {
            let mut row: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
            if row.is_empty() {
                row.push(rng.random_range(0..k));
            }
            lists.push(row);
        }
        let p = MembershipMatrix::from_cluster_lists(&lists, k).unwrap();
        let w = membership_weights(&p).unwrap();
        let got = cluster_weights(&p, &w);
        for c in 0..k {
            let mut expected = 0.0;
            for list in &lists {
                if list.contains(&c) {
                    expected += 1.0 / (list.len() * list.len()) as f64;
                }
            }
            assert!((got[c] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn coverage_examples() {
        let all = MembershipMatrix::from_cluster_lists(&[vec![0, 1], vec![0, 1]], 2).unwrap();
        assert!(coverage_check(&all));
        let hole = MembershipMatrix::from_cluster_lists(&[vec![0, 1], vec![]], 2).unwrap();
        assert!(!coverage_check(&hole));
        let ident = MembershipMatrix::from_labels(&[0, 1, 2], 3).unwrap();
        assert!(coverage_check(&ident));
    }

    #[test]
    fn data_matrix_rejects_non_finite_and_empty() {
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    fn covered_membership() -> impl Strategy<Value = MembershipMatrix> {
        (1usize..6, 1usize..12).prop_flat_map(|(k, n)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), k), n).prop_map(
                move |rows| {
                    let lists: Vec<Vec<usize>> = rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            let mut l: Vec<usize> = (0..k).filter(|&c| r[c]).collect();
                            if l.is_empty() {
                                l.push(i % k);
                            }
                            l
                        })
                        .collect();
                    MembershipMatrix::from_cluster_lists(&lists, k).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn weights_are_bounded(p in covered_membership()) {
            let w = membership_weights(&p).unwrap();
            let k = p.k() as f64;
            for &wj in w.as_slice() {
                prop_assert!(wj >= 1.0 / (k * k) && wj <= 1.0);
            }
        }

        #[test]
        fn cluster_weights_are_linear(p in covered_membership(), alpha in 0.01f64..10.0) {
            let w = membership_weights(&p).unwrap();
            let base = cluster_weights(&p, &w);
            let scaled = cluster_weights(&p, &w.scaled(alpha));
            for (b, s) in base.iter().zip(&scaled) {
                prop_assert!((b * alpha - s).abs() <= 1e-12 * (1.0 + b.abs() * alpha));
            }
        }

        #[test]
        fn singleton_cluster_weights_are_cardinalities(
            labels in proptest::collection::vec(0usize..4, 1..20)
        ) {
            let p = MembershipMatrix::from_labels(&labels, 4).unwrap();
            let w = membership_weights(&p).unwrap();
            let big_w = cluster_weights(&p, &w);
            for (c, wc) in big_w.iter().enumerate() {
                prop_assert_eq!(*wc, p.cluster_size(c) as f64);
            }
        }
    }
}
