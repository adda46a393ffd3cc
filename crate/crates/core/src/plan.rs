use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::distribution::KeypointPairing;
use crate::masking::MaskMatrix;

/// Algorithm that produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverTag {
    NetworkSimplex,
    Sinkhorn,
    SinkhornLog,
    FrankWolfe,
    PartialNetworkSimplex,
    PartialSinkhorn,
    DualL2,
}

/// A masked (physical) transport plan with recomputed marginal diagnostics.
///
/// For balanced plans the marginal errors are `|plan·1 - p|∞` and
/// `|planᵀ·1 - q|∞`. For partial plans they measure the violation of the
/// partial constraints instead: excess over `p` (resp. `q`) on ordinary rows
/// and absolute deviation on keypoint rows (resp. columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: Array2<f64>,
    row_marginal_error: f64,
    col_marginal_error: f64,
    objective: f64,
    solver_tag: SolverTag,
    iterations: usize,
    converged: bool,
}

impl TransportPlan {
    pub fn balanced(
        values: Array2<f64>,
        p: ArrayView1<f64>,
        q: ArrayView1<f64>,
        objective: f64,
        solver_tag: SolverTag,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let (row_marginal_error, col_marginal_error) = balanced_marginal_errors(values.view(), p, q);
        Self {
            values,
            row_marginal_error,
            col_marginal_error,
            objective,
            solver_tag,
            iterations,
            converged,
        }
    }

    pub fn partial(
        values: Array2<f64>,
        p: ArrayView1<f64>,
        q: ArrayView1<f64>,
        kp: &KeypointPairing,
        objective: f64,
        solver_tag: SolverTag,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let (row_marginal_error, col_marginal_error) =
            partial_marginal_errors(values.view(), p, q, kp);
        Self {
            values,
            row_marginal_error,
            col_marginal_error,
            objective,
            solver_tag,
            iterations,
            converged,
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn row_marginal_error(&self) -> f64 {
        self.row_marginal_error
    }

    pub fn col_marginal_error(&self) -> f64 {
        self.col_marginal_error
    }

    pub fn max_marginal_error(&self) -> f64 {
        self.row_marginal_error.max(self.col_marginal_error)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn solver_tag(&self) -> SolverTag {
        self.solver_tag
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn row_sums(&self) -> Array1<f64> {
        self.values.sum_axis(Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.values.sum_axis(Axis(0))
    }

    pub fn total_mass(&self) -> f64 {
        self.values.sum()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }
}

pub fn balanced_marginal_errors(
    plan: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> (f64, f64) {
    let rows = plan.sum_axis(Axis(1));
    let cols = plan.sum_axis(Axis(0));
    (max_abs_diff(rows.view(), p), max_abs_diff(cols.view(), q))
}

pub fn partial_marginal_errors(
    plan: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    kp: &KeypointPairing,
) -> (f64, f64) {
    let rows = plan.sum_axis(Axis(1));
    let cols = plan.sum_axis(Axis(0));
    let mut row_err = rows
        .iter()
        .zip(p.iter())
        .map(|(r, pi)| (r - pi).max(0.0))
        .fold(0.0, f64::max);
    let mut col_err = cols
        .iter()
        .zip(q.iter())
        .map(|(c, qj)| (c - qj).max(0.0))
        .fold(0.0, f64::max);
    for &(i, j) in kp.pairs() {
        row_err = row_err.max((rows[i] - p[i]).abs());
        col_err = col_err.max((cols[j] - q[j]).abs());
    }
    (row_err, col_err)
}

fn max_abs_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `⟨plan, cost⟩_F`.
pub fn linear_objective(plan: ArrayView2<f64>, cost: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(plan).and(cost).for_each(|&a, &b| acc += a * b);
    acc
}

/// Zeroes closed cells and pins every cell that the marginal constraints
/// determine on their own: a row (column) with a single open cell must carry
/// exactly `p_i` (`q_j`) there.
pub(crate) fn enforce_forced_cells(
    plan: &mut Array2<f64>,
    mask: &MaskMatrix,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) {
    mask.apply(plan);
    let values = mask.values();
    for (j, count) in mask.col_counts().into_iter().enumerate() {
        if count == 1 {
            let i = (0..p.len()).find(|&i| values[[i, j]]).unwrap();
            plan[[i, j]] = q[j];
        }
    }
    for (i, count) in mask.row_counts().into_iter().enumerate() {
        if count == 1 {
            let j = (0..q.len()).find(|&j| values[[i, j]]).unwrap();
            plan[[i, j]] = p[i];
        }
    }
}
