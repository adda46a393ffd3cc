//! Discrete distributions and annotated keypoint pairings.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Tolerance used for mass bookkeeping (normalization, keypoint mass equality,
/// total-mass agreement).
pub const MASS_TOL: f64 = 1e-12;

/// Weighted point cloud: one side of a transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl DiscreteDistribution {
    /// Builds a probability distribution, normalizing the weights to unit mass.
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let dist = Self::with_raw_mass(points, weights)?;
        Ok(dist.normalized())
    }

    /// Builds a distribution that keeps the given weights as raw mass.
    pub fn with_raw_mass(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let (count, dim) = points.dim();
        if count == 0 || dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "points must be non-empty with dim >= 1, got {count}x{dim}"
            )));
        }
        if weights.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "{count} points but {} weights",
                weights.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("points"));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("weights"));
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w <= 0.0) {
            return Err(Error::NonPositiveWeight { index, value });
        }
        Ok(Self { points, weights })
    }

    /// Uniform probability weights over the given points.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, Array1::from_elem(n, 1.0))
    }

    /// Uniform weights of `mass` per point, kept raw.
    pub fn uniform_mass(points: Array2<f64>, mass: f64) -> Result<Self> {
        let n = points.nrows();
        Self::with_raw_mass(points, Array1::from_elem(n, mass))
    }

    /// Rescales to unit mass. A distribution already normalized within
    /// [`MASS_TOL`] is returned unchanged, so this is idempotent.
    pub fn normalized(mut self) -> Self {
        let total = self.weights.sum();
        if (total - 1.0).abs() > MASS_TOL {
            self.weights.mapv_inplace(|w| w / total);
        }
        self
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.sum()
    }
}

/// Convenience wrapper over [`DiscreteDistribution::new`] /
/// [`DiscreteDistribution::with_raw_mass`].
pub fn make_distribution(
    points: Array2<f64>,
    weights: Array1<f64>,
    raw_mass: bool,
) -> Result<DiscreteDistribution> {
    if raw_mass {
        DiscreteDistribution::with_raw_mass(points, weights)
    } else {
        DiscreteDistribution::new(points, weights)
    }
}

/// Annotated `(source, target)` index pairs whose matching must be preserved.
///
/// Indices are 0-based. A pairing written 1-based as `{(3,2),(6,5)}` is
/// `[(2, 1), (5, 4)]` here.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeypointPairing {
    pairs: Vec<(usize, usize)>,
}

impl KeypointPairing {
    /// Checks that no source or target index is repeated.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[..a] {
                if i == k {
                    return Err(Error::DuplicateKeypoint {
                        side: "source",
                        index: i,
                    });
                }
                if j == l {
                    return Err(Error::DuplicateKeypoint {
                        side: "target",
                        index: j,
                    });
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a pairing and validates it against the two distributions.
    pub fn for_distributions(
        pairs: Vec<(usize, usize)>,
        source: &DiscreteDistribution,
        target: &DiscreteDistribution,
    ) -> Result<Self> {
        let kp = Self::new(pairs)?;
        kp.validate(source.weights(), target.weights())?;
        Ok(kp)
    }

    /// Index bounds plus the equal-mass precondition `p_i = q_j`.
    pub fn validate(&self, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<()> {
        self.check_bounds(p.len(), q.len())?;
        for &(i, j) in &self.pairs {
            if (p[i] - q[j]).abs() > MASS_TOL {
                return Err(Error::MassMismatchAtKeypoint {
                    source_index: i,
                    target_index: j,
                    source_mass: p[i],
                    target_mass: q[j],
                });
            }
        }
        Ok(())
    }

    pub fn check_bounds(&self, m: usize, n: usize) -> Result<()> {
        for &(i, j) in &self.pairs {
            if i >= m {
                return Err(Error::IndexOutOfBounds {
                    side: "source",
                    index: i,
                    len: m,
                });
            }
            if j >= n {
                return Err(Error::IndexOutOfBounds {
                    side: "target",
                    index: j,
                    len: n,
                });
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Source keypoint indices, in pairing order.
    pub fn source_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// Target keypoint indices, in pairing order.
    pub fn target_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Keeps only the first `count` pairs.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            pairs: self.pairs.iter().copied().take(count).collect(),
        }
    }

    /// The same pairing read from the other direction.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Total source mass sitting on keypoints.
    pub fn source_mass(&self, p: ArrayView1<f64>) -> f64 {
        self.pairs.iter().map(|&(i, _)| p[i]).sum()
    }

    /// Total target mass sitting on keypoints.
    pub fn target_mass(&self, q: ArrayView1<f64>) -> f64 {
        self.pairs.iter().map(|&(_, j)| q[j]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_weights_are_normalized() {
        let d = make_distribution(
            array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            array![1.0, 1.0, 1.0],
            false,
        )
        .unwrap();
        for &w in d.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn raw_mass_is_kept() {
        let d = make_distribution(array![[2.0]], array![5.0], true).unwrap();
        assert_eq!(d.total_mass(), 5.0);
    }

    #[test]
    fn zero_weight_rejected() {
        let err = make_distribution(
            array![[0.0], [1.0], [2.0]],
            array![1.0, 0.0, 1.0],
            false,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::NonPositiveWeight {
                index: 1,
                value: 0.0
            }
        );
    }

    #[test]
    fn shape_and_finiteness_checked() {
        assert!(matches!(
            make_distribution(array![[0.0], [1.0]], array![1.0], false),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            make_distribution(array![[f64::NAN]], array![1.0], false),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn normalization_is_idempotent() {
        let d = make_distribution(
            array![[0.0], [1.0], [2.0], [3.0]],
            array![0.3, 1.7, 2.9, 0.1],
            false,
        )
        .unwrap();
        let again = d.clone().normalized();
        assert_eq!(d, again);
    }

    #[test]
    fn keypoint_duplicates_and_bounds() {
        assert!(matches!(
            KeypointPairing::new(vec![(0, 1), (0, 2)]),
            Err(Error::DuplicateKeypoint { side: "source", .. })
        ));
        assert!(matches!(
            KeypointPairing::new(vec![(0, 1), (2, 1)]),
            Err(Error::DuplicateKeypoint { side: "target", .. })
        ));
        let kp = KeypointPairing::new(vec![(3, 0)]).unwrap();
        let p = array![0.5, 0.5];
        assert!(matches!(
            kp.validate(p.view(), p.view()),
            Err(Error::IndexOutOfBounds { side: "source", .. })
        ));
    }

    #[test]
    fn keypoint_mass_mismatch() {
        let kp = KeypointPairing::new(vec![(0, 1)]).unwrap();
        let p = array![0.3, 0.7];
        let q = array![0.8, 0.2];
        assert!(matches!(
            kp.validate(p.view(), q.view()),
            Err(Error::MassMismatchAtKeypoint {
                source_index: 0,
                target_index: 1,
                ..
            })
        ));
    }
}
