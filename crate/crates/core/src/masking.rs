//! Binary masks that pin each keypoint to its partner.
//!
//! For a pair `(i, j)` the mask keeps only cell `(i, j)` on row `i` and
//! column `j`. Every row and column untouched by keypoints stays fully open.
//! When `p_i = q_j` for every pair, any coupling supported on the mask sends
//! all of `p_i` to `j` and nothing else reaches `j`.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::distribution::{KeypointPairing, MASS_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    values: Array2<bool>,
}

impl MaskMatrix {
    pub fn ones(m: usize, n: usize) -> Self {
        Self {
            values: Array2::from_elem((m, n), true),
        }
    }

    pub fn from_bools(values: Array2<bool>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> ArrayView2<'_, bool> {
        self.values.view()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.values[[i, j]]
    }

    /// 0/1 matrix form.
    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(|b| if b { 1.0 } else { 0.0 })
    }

    /// Number of open cells per row.
    pub fn row_counts(&self) -> Vec<usize> {
        self.values
            .outer_iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Number of open cells per column.
    pub fn col_counts(&self) -> Vec<usize> {
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Zeroes every closed cell of `plan` in place.
    pub fn apply(&self, plan: &mut Array2<f64>) {
        ndarray::Zip::from(plan).and(&self.values).for_each(|v, &open| {
            if !open {
                *v = 0.0;
            }
        });
    }
}

pub fn build_mask(m: usize, n: usize, kp: &KeypointPairing) -> Result<MaskMatrix> {
    kp.check_bounds(m, n)?;
    let mut values = Array2::from_elem((m, n), true);
    for &(i, _) in kp.pairs() {
        values.row_mut(i).fill(false);
    }
    for &(_, j) in kp.pairs() {
        values.column_mut(j).fill(false);
    }
    for &(i, j) in kp.pairs() {
        values[[i, j]] = true;
    }
    Ok(MaskMatrix { values })
}

/// Outcome of a successful feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Row mass left after removing keypoint rows.
    pub free_row_mass: f64,
    /// Column mass left after removing keypoint columns.
    pub free_col_mass: f64,
    pub keypoint_count: usize,
}

/// Confirms the keypoint mass precondition and that the masked transport
/// polytope is nonempty.
///
/// Keypoint rows and columns are matched one-to-one; the remaining block is
/// fully open, so the polytope is nonempty exactly when the leftover masses agree.
pub fn check_masked_feasibility(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    mask: &MaskMatrix,
    kp: &KeypointPairing,
) -> Result<FeasibilityReport> {
    if mask.dim() != (p.len(), q.len()) {
        return Err(Error::ShapeMismatch(format!(
            "mask {:?} vs masses ({}, {})",
            mask.dim(),
            p.len(),
            q.len()
        )));
    }
    kp.validate(p, q)?;
    let free_row_mass = p.sum() - kp.source_mass(p);
    let free_col_mass = q.sum() - kp.target_mass(q);
    if (free_row_mass - free_col_mass).abs() > MASS_TOL {
        return Err(Error::InfeasibleMask {
            row_mass: free_row_mass,
            col_mass: free_col_mass,
        });
    }
    Ok(FeasibilityReport {
        free_row_mass,
        free_col_mass,
        keypoint_count: kp.len(),
    })
}
