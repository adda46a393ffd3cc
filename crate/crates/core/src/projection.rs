//! Mapping source points through a plan, and outlier detection by received
//! mass.
//!
//! The barycentric map sends `x_i` to `Σ_j π_ij y_j / Σ_j π_ij`. Its learned,
//! out-of-sample variants (manifold barycentric projection with an
//! adversarial loss) are outside this crate.

use ndarray::{Array2, Axis};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::plan::TransportPlan;

/// Barycentric images of the source points.
///
/// Rows of sources that send no mass (possible in partial plans) are filled
/// with `NaN` and listed in `unmapped`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricImage {
    pub points: Array2<f64>,
    pub unmapped: Vec<usize>,
}

impl BarycentricImage {
    pub fn is_mapped(&self, i: usize) -> bool {
        self.unmapped.binary_search(&i).is_err()
    }
}

pub fn barycentric_map(plan: &TransportPlan, target: &DiscreteDistribution) -> Result<BarycentricImage> {
    let (m, n) = plan.dim();
    if n != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan has {n} columns, target has {} points",
            target.len()
        )));
    }
    let values = plan.values();
    let mut points = values.dot(&target.points());
    let mass = values.sum_axis(Axis(1));
    let mut unmapped = Vec::new();
    for i in 0..m {
        let mut row = points.row_mut(i);
        if mass[i] > 0.0 {
            row.mapv_inplace(|v| v / mass[i]);
        } else {
            row.fill(f64::NAN);
            unmapped.push(i);
        }
    }
    Ok(BarycentricImage { points, unmapped })
}

/// Unlabeled target indices that receive the least mass.
///
/// Returns `⌈η · #unlabeled⌉` indices ordered by increasing column sum, ties
/// broken by lower index. `labeled` target indices are never rejected.
pub fn received_mass_outliers(plan: &TransportPlan, eta: f64, labeled: &[usize]) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidEta(eta));
    }
    let n = plan.dim().1;
    if let Some(&bad) = labeled.iter().find(|&&j| j >= n) {
        return Err(Error::IndexOutOfBounds {
            side: "target",
            index: bad,
            len: n,
        });
    }
    let received = plan.col_sums();
    let mut candidates: Vec<usize> = (0..n).filter(|j| !labeled.contains(j)).collect();
    let count = (eta * candidates.len() as f64).ceil() as usize;
    candidates.sort_by(|&a, &b| received[a].total_cmp(&received[b]).then(a.cmp(&b)));
    candidates.truncate(count);
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::SolverTag;
    use ndarray::array;

    fn plan(values: Array2<f64>) -> TransportPlan {
        let p = values.sum_axis(Axis(1));
        let q = values.sum_axis(Axis(0));
        TransportPlan::balanced(values, p.view(), q.view(), 0.0, SolverTag::NetworkSimplex, 0, true)
    }

    #[test]
    fn midpoint() {
        let target = DiscreteDistribution::uniform(array![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let img = barycentric_map(&plan(array![[0.5, 0.5]]), &target).unwrap();
        assert_eq!(img.points, array![[1.0, 0.0]]);
        assert!(img.unmapped.is_empty());
    }

    #[test]
    fn zero_row_flagged() {
        let target = DiscreteDistribution::uniform(array![[1.0], [3.0]]).unwrap();
        let img = barycentric_map(&plan(array![[0.0, 0.0], [0.2, 0.2]]), &target).unwrap();
        assert!(img.points[[0, 0]].is_nan());
        assert_eq!(img.points[[1, 0]], 2.0);
        assert_eq!(img.unmapped, vec![0]);
        assert!(!img.is_mapped(0) && img.is_mapped(1));
    }

    #[test]
    fn shape_checked() {
        let target = DiscreteDistribution::uniform(array![[1.0]]).unwrap();
        assert!(matches!(
            barycentric_map(&plan(array![[0.5, 0.5]]), &target),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn outliers_by_received_mass() {
        let t = plan(array![[0.3, 0.0, 0.1, 0.1], [0.2, 0.0, 0.1, 0.2]]);
        assert!(received_mass_outliers(&t, 0.0, &[]).unwrap().is_empty());
        assert_eq!(received_mass_outliers(&t, 0.2, &[]).unwrap(), vec![1]);
        // labeled column 1 is never rejected
        assert_eq!(received_mass_outliers(&t, 0.5, &[1]).unwrap(), vec![2, 3]);
        assert_eq!(received_mass_outliers(&t, 1.0, &[]), Err(Error::InvalidEta(1.0)));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let t = plan(array![[0.5, 0.0, 0.0, 0.5]]);
        assert_eq!(received_mass_outliers(&t, 0.5, &[]).unwrap(), vec![1, 2]);
    }
}
