//! Entropic transport over the masked polytope.
//!
//! With `K = M ⊙ exp(-objective / ε)` the scalings alternate
//! `u = p / (K v)` and `v = q / (Kᵀ u)`, and the plan is `diag(u) K diag(v)`.
//! Masked cells have a zero kernel entry, so they never carry mass.
//! Iteration stops once the row marginal error (the column marginal is exact
//! right after the `v` update) falls below the configured tolerance.

use ndarray::{Array1, Array2, ArrayView1};

use crate::config::SolverConfig;
use crate::cost::CostMatrix;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::exact::{check_shapes, check_total_mass};
use crate::masking::MaskMatrix;
use crate::plan::{enforce_forced_cells, linear_objective, SolverTag, TransportPlan};

/// A finished Sinkhorn run together with the per-iteration row residuals.
#[derive(Debug, Clone)]
pub struct SinkhornRun {
    pub plan: TransportPlan,
    pub residuals: Vec<f64>,
}

fn check_supports(p: ArrayView1<f64>, q: ArrayView1<f64>, mask: &MaskMatrix) -> Result<()> {
    for (i, count) in mask.row_counts().into_iter().enumerate() {
        if count == 0 && p[i] > 0.0 {
            return Err(Error::Infeasible(format!("source {i} has no open cell")));
        }
    }
    for (j, count) in mask.col_counts().into_iter().enumerate() {
        if count == 0 && q[j] > 0.0 {
            return Err(Error::Infeasible(format!("target {j} has no open cell")));
        }
    }
    Ok(())
}

fn validate(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
) -> Result<()> {
    check_shapes(p, q, objective, mask)?;
    check_total_mass(p, q)?;
    check_supports(p, q, mask)
}

fn finish(
    mut values: Array2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    tag: SolverTag,
    iterations: usize,
    converged: bool,
) -> TransportPlan {
    enforce_forced_cells(&mut values, mask, p, q);
    let value = linear_objective(values.view(), objective.values());
    TransportPlan::balanced(values, p, q, value, tag, iterations, converged)
}

/// Linear-domain Sinkhorn with the residual trace.
pub fn sinkhorn_masked_traced(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
) -> Result<SinkhornRun> {
    validate(p, q, objective, mask)?;
    let (m, n) = objective.dim();
    let eps = cfg.effective_epsilon(objective.max());
    let cost = objective.values();
    let kernel = Array2::from_shape_fn((m, n), |(i, j)| {
        if mask.allows(i, j) {
            (-cost[[i, j]] / eps).exp()
        } else {
            0.0
        }
    });
    for (i, row) in kernel.outer_iter().enumerate() {
        if p[i] > 0.0 && row.iter().all(|&k| k == 0.0) {
            return Err(Error::NumericalUnderflow(format!(
                "kernel row {i} underflows to zero at epsilon {eps:e}; use the log-domain solver"
            )));
        }
    }
    for (j, col) in kernel.columns().into_iter().enumerate() {
        if q[j] > 0.0 && col.iter().all(|&k| k == 0.0) {
            return Err(Error::NumericalUnderflow(format!(
                "kernel column {j} underflows to zero at epsilon {eps:e}; use the log-domain solver"
            )));
        }
    }

    let scale = |mass: ArrayView1<f64>, denom: &Array1<f64>, what: &str| -> Result<Array1<f64>> {
        let mut out = Array1::zeros(mass.len());
        for (k, (&a, &d)) in mass.iter().zip(denom.iter()).enumerate() {
            if a == 0.0 {
                continue;
            }
            let s = a / d;
            if !s.is_finite() || s == 0.0 {
                return Err(Error::NumericalUnderflow(format!(
                    "{what} scaling {k} left the representable range at epsilon {eps:e}; use the log-domain solver"
                )));
            }
            out[k] = s;
        }
        Ok(out)
    };

    let mut u = Array1::<f64>::ones(m);
    let mut v = Array1::<f64>::ones(n);
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations() {
        iterations = it;
        u = scale(p, &kernel.dot(&v), "row")?;
        v = scale(q, &kernel.t().dot(&u), "column")?;
        let rows = &u * &kernel.dot(&v);
        let err = rows
            .iter()
            .zip(p.iter())
            .map(|(r, a)| (r - a).abs())
            .fold(0.0, f64::max);
        residuals.push(err);
        if err < cfg.tolerance() {
            converged = true;
            break;
        }
    }
    let mut values = kernel;
    for (i, mut row) in values.outer_iter_mut().enumerate() {
        let ui = u[i];
        for (j, x) in row.iter_mut().enumerate() {
            *x *= ui * v[j];
        }
    }
    let plan = finish(values, p, q, objective, mask, SolverTag::Sinkhorn, iterations, converged);
    Ok(SinkhornRun { plan, residuals })
}

pub fn sinkhorn_masked_masses(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
) -> Result<TransportPlan> {
    sinkhorn_masked_traced(p, q, objective, mask, cfg).map(|run| run.plan)
}

/// Linear-domain masked Sinkhorn. A plan that missed the tolerance is still
/// returned, with `converged() == false`.
pub fn sinkhorn_masked(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
) -> Result<TransportPlan> {
    sinkhorn_masked_masses(p.weights(), q.weights(), objective, mask, cfg)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on the dual potentials `f, g`; closed cells carry a
/// `-inf` log-kernel entry.
pub fn sinkhorn_masked_log_masses(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
) -> Result<TransportPlan> {
    validate(p, q, objective, mask)?;
    let (m, n) = objective.dim();
    let eps = cfg.effective_epsilon(objective.max());
    let log_kernel = Array2::from_shape_fn((m, n), |(i, j)| {
        if mask.allows(i, j) {
            -objective.values()[[i, j]] / eps
        } else {
            f64::NEG_INFINITY
        }
    });
    let log_p = p.mapv(f64::ln);
    let log_q = q.mapv(f64::ln);
    // potentials scaled by 1/eps
    let mut f = Array1::<f64>::zeros(m);
    let mut g = Array1::<f64>::zeros(n);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations() {
        iterations = it;
        for i in 0..m {
            let row = log_kernel.row(i);
            f[i] = log_p[i] - log_sum_exp(row.iter().zip(g.iter()).map(|(&k, &gj)| k + gj));
        }
        for j in 0..n {
            let col = log_kernel.column(j);
            g[j] = log_q[j] - log_sum_exp(col.iter().zip(f.iter()).map(|(&k, &fi)| k + fi));
        }
        let mut err: f64 = 0.0;
        for i in 0..m {
            let row = log_kernel.row(i);
            let mass: f64 = row
                .iter()
                .zip(g.iter())
                .map(|(&k, &gj)| (f[i] + k + gj).exp())
                .sum();
            err = err.max((mass - p[i]).abs());
        }
        if err < cfg.tolerance() {
            converged = true;
            break;
        }
    }
    let values = Array2::from_shape_fn((m, n), |(i, j)| {
        let l = f[i] + log_kernel[[i, j]] + g[j];
        if l == f64::NEG_INFINITY || l.is_nan() {
            0.0
        } else {
            l.exp()
        }
    });
    Ok(finish(
        values,
        p,
        q,
        objective,
        mask,
        SolverTag::SinkhornLog,
        iterations,
        converged,
    ))
}

/// Log-domain masked Sinkhorn; same contract as [`sinkhorn_masked`].
pub fn sinkhorn_masked_log(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
) -> Result<TransportPlan> {
    sinkhorn_masked_log_masses(p.weights(), q.weights(), objective, mask, cfg)
}
