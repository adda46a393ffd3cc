use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};

/// Ground metric used for point-to-point costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    SqEuclidean,
    Euclidean,
}

/// Nonnegative, finite cost matrix. Also used for guiding matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Array2<f64>,
}

/// Guiding matrices share the cost-matrix invariants.
pub type GuidingMatrix = CostMatrix;

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("cost matrix"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameters(
                "cost matrix has negative entries".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Intra-domain matrix: additionally square and symmetric with zero diagonal.
    pub fn intra(values: Array2<f64>) -> Result<Self> {
        let cost = Self::new(values)?;
        let (r, c) = cost.values.dim();
        if r != c {
            return Err(Error::ShapeMismatch(format!(
                "intra-domain cost must be square, got {r}x{c}"
            )));
        }
        let scale = cost.max().max(1.0);
        for i in 0..r {
            if cost.values[[i, i]] != 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "intra-domain cost has nonzero diagonal at {i}"
                )));
            }
            for j in 0..i {
                if (cost.values[[i, j]] - cost.values[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameters(format!(
                        "intra-domain cost not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(cost)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Divides every entry by the maximum entry (no-op for an all-zero matrix).
    pub fn max_normalized(&self) -> Self {
        let m = self.max();
        if m > 0.0 {
            Self {
                values: self.values.mapv(|v| v / m),
            }
        } else {
            self.clone()
        }
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn blend(&self, other: &CostMatrix, weight: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot blend {:?} with {:?}",
                self.dim(),
                other.dim()
            )));
        }
        let mut values = Array2::zeros(self.dim());
        Zip::from(&mut values)
            .and(&self.values)
            .and(&other.values)
            .for_each(|out, &a, &b| *out = weight * a + (1.0 - weight) * b);
        Self::new(values)
    }
}

/// Pairwise metric values between the supports of `a` and `b`.
pub fn pairwise_cost(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    metric: Metric,
) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let (xa, xb) = (a.points(), b.points());
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, row_a) in xa.outer_iter().enumerate() {
        for (j, row_b) in xb.outer_iter().enumerate() {
            let sq: f64 = row_a
                .iter()
                .zip(row_b.iter())
                .map(|(u, v)| (u - v) * (u - v))
                .sum();
            out[[i, j]] = match metric {
                Metric::SqEuclidean => sq,
                Metric::Euclidean => sq.sqrt(),
            };
        }
    }
    CostMatrix::new(out)
}

/// Intra-domain cost of a distribution's own support.
pub fn intra_cost(a: &DiscreteDistribution, metric: Metric) -> Result<CostMatrix> {
    let mut c = pairwise_cost(a, a, metric)?.into_inner();
    // enforce exact symmetry regardless of summation order
    let n = c.nrows();
    for i in 0..n {
        c[[i, i]] = 0.0;
        for j in 0..i {
            c[[j, i]] = c[[i, j]];
        }
    }
    CostMatrix::intra(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(x: f64, y: f64) -> DiscreteDistribution {
        DiscreteDistribution::uniform(array![[x, y]]).unwrap()
    }

    #[test]
    fn three_four_five() {
        let (a, b) = (single(0.0, 0.0), single(3.0, 4.0));
        assert_eq!(
            pairwise_cost(&a, &b, Metric::SqEuclidean).unwrap().values()[[0, 0]],
            25.0
        );
        assert_eq!(
            pairwise_cost(&a, &b, Metric::Euclidean).unwrap().values()[[0, 0]],
            5.0
        );
    }

    #[test]
    fn self_cost_symmetric_zero_diagonal() {
        let a = DiscreteDistribution::uniform(array![
            [0.1, 0.7],
            [-1.3, 2.2],
            [4.0, 0.5],
            [0.0, 0.0]
        ])
        .unwrap();
        let c = pairwise_cost(&a, &a, Metric::SqEuclidean).unwrap();
        let v = c.values();
        for i in 0..4 {
            assert_eq!(v[[i, i]], 0.0);
            for j in 0..4 {
                assert_eq!(v[[i, j]], v[[j, i]]);
            }
        }
        assert!(intra_cost(&a, Metric::Euclidean).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteDistribution::uniform(array![[0.0]]).unwrap();
        let b = single(0.0, 0.0);
        assert_eq!(
            pairwise_cost(&a, &b, Metric::Euclidean).unwrap_err(),
            Error::DimensionMismatch(1, 2)
        );
    }

    #[test]
    fn rejects_negative_and_asymmetric() {
        assert!(CostMatrix::new(array![[-1.0]]).is_err());
        assert!(CostMatrix::intra(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(CostMatrix::intra(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
    }
}
