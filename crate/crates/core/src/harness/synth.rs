//! Synthetic overlapping datasets.
//!
//! Objects are laid out class by class (core members of class 0, then class
//! 1, ...) followed by the overlap objects, which carry both labels of
//! `overlap_pair`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OkmError, Result};
use crate::eval::LabelSets;
use crate::model::DataMatrix;

/// Distance of blob centers from the layout center.
pub const BLOB_RADIUS: f64 = 3.0;
/// Every coordinate of the blob layout center; keeps blob data in the
/// positive orthant so fractional-degree polynomial kernels stay defined.
pub const BLOB_SHIFT: f64 = 2.0 * BLOB_RADIUS;
/// Radius of ring `c` is `(c + 1) * RING_SPACING`.
pub const RING_SPACING: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticMode {
    /// One isotropic Gaussian per class, centers evenly spaced on a circle
    /// around `(BLOB_SHIFT, ..., BLOB_SHIFT)`;
    /// overlap objects come from a Gaussian at the midpoint of the pair's centers.
    GaussianBlobs,
    /// Class `c` on a ring of radius `(c + 1) * RING_SPACING` in the first two
    /// coordinates; overlap objects on the ring midway between the pair.
    ConcentricRings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub mode: SyntheticMode,
    /// Core (single-label) objects per class.
    pub class_sizes: Vec<usize>,
    /// Objects labeled with both classes of `overlap_pair`, in addition to the cores.
    pub overlap: usize,
    pub overlap_pair: (usize, usize),
    pub dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Three classes of 21, 26 and 17 objects plus 11 shared by the first and
    /// third: 75 objects.
    pub fn eachmovie_analog(seed: u64) -> Self {
        Self {
            mode: SyntheticMode::GaussianBlobs,
            class_sizes: vec![21, 26, 17],
            overlap: 11,
            overlap_pair: (0, 2),
            dim: 3,
            noise: 1.0,
            seed,
        }
    }

    /// Two concentric rings (radii 4 and 8, point counts proportional to
    /// circumference) with a 20-object overlap band at radius 6.
    pub fn rings(seed: u64) -> Self {
        Self {
            mode: SyntheticMode::ConcentricRings,
            class_sizes: vec![60, 120],
            overlap: 20,
            overlap_pair: (0, 1),
            dim: 2,
            noise: 0.2,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.class_sizes.iter().sum::<usize>() + self.overlap
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OkmError::InvalidConfig(msg));
        if self.class_sizes.is_empty() || self.class_sizes.contains(&0) {
            return bad("every class needs at least one object".into());
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.mode == SyntheticMode::ConcentricRings && self.dim < 2 {
            return bad("rings need at least two dimensions".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if self.overlap > 0 {
            let (a, b) = self.overlap_pair;
            let m = self.class_sizes.len();
            if a == b || a >= m || b >= m {
                return bad(format!(
                    "overlap pair ({a}, {b}) must name two distinct classes out of {m}"
                ));
            }
            let cap = self.class_sizes[a].min(self.class_sizes[b]);
            if self.overlap > cap {
                return bad(format!(
                    "overlap {} exceeds the smaller class of the pair ({cap})",
                    self.overlap
                ));
            }
        }
        Ok(())
    }
}

fn blob_center(class: usize, classes: usize, dim: usize) -> Vec<f64> {
    let mut center = vec![BLOB_SHIFT; dim];
    if dim == 1 {
        center[0] += class as f64 * BLOB_RADIUS;
    } else {
        let angle = std::f64::consts::TAU * class as f64 / classes as f64;
        center[0] += BLOB_RADIUS * angle.cos();
        center[1] += BLOB_RADIUS * angle.sin();
    }
    center
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(DataMatrix, LabelSets)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise.max(0.0))
        .map_err(|e| OkmError::InvalidConfig(e.to_string()))?;
    let classes = spec.class_sizes.len();
    let d = spec.dim;
    let mut values = Vec::with_capacity(spec.total() * d);
    let mut labels = Vec::with_capacity(spec.total());

    let point = |rng: &mut ChaCha8Rng, values: &mut Vec<f64>, anchor: Anchor| match (spec.mode, anchor) {
        (SyntheticMode::GaussianBlobs, Anchor::Class(c)) => {
            let center = blob_center(c, classes, d);
            values.extend(center.iter().map(|m| m + normal.sample(rng)));
        }
        (SyntheticMode::GaussianBlobs, Anchor::Between(a, b)) => {
            let (ca, cb) = (blob_center(a, classes, d), blob_center(b, classes, d));
            values.extend(ca.iter().zip(&cb).map(|(x, y)| 0.5 * (x + y) + normal.sample(rng)));
        }
        (SyntheticMode::ConcentricRings, anchor) => {
            let radius = match anchor {
                Anchor::Class(c) => (c + 1) as f64 * RING_SPACING,
                Anchor::Between(a, b) => 0.5 * (a + b + 2) as f64 * RING_SPACING,
            };
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let r = radius + normal.sample(rng);
            values.push(r * angle.cos());
            values.push(r * angle.sin());
            values.extend((2..d).map(|_| normal.sample(rng)));
        }
    };

    for (c, &size) in spec.class_sizes.iter().enumerate() {
        for _ in 0..size {
            point(&mut rng, &mut values, Anchor::Class(c));
            labels.push(vec![c]);
        }
    }
    let (a, b) = spec.overlap_pair;
    for _ in 0..spec.overlap {
        point(&mut rng, &mut values, Anchor::Between(a, b));
        labels.push(vec![a, b]);
    }

    Ok((DataMatrix::new(labels.len(), d, values)?, LabelSets::new(labels)?))
}

#[derive(Clone, Copy)]
enum Anchor {
    Class(usize),
    Between(usize, usize),
}
