//! Frank-Wolfe for the keypoint-guided Gromov-Wasserstein blend
//! `alpha * L_gw(M ⊙ π) + (1 - alpha) * <M ⊙ π, G>` over the masked polytope.
//!
//! `L_gw(π) = Σ_{i,j,k,l} π_ij π_kl (Cs_ik - Ct_jl)²` is evaluated through the
//! squared-loss factorization
//! `(Cs∘Cs) r 1ᵀ + 1 cᵀ (Ct∘Ct) - 2 Cs π Ctᵀ` with `r`, `c` the plan
//! marginals, in `O(m²n + mn²)`.
//!
//! Each iteration solves a linear masked problem on the gradient and takes an
//! exact line-search step toward its solution. The objective restricted to the
//! segment is a quadratic, so the step has a closed form.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::config::SolverConfig;
use crate::cost::CostMatrix;
use crate::distribution::{DiscreteDistribution, KeypointPairing};
use crate::error::{Error, Result};
use crate::exact::{check_total_mass, kpg_guiding_matrix, solve_masked_masses, Backend};
use crate::masking::{build_mask, check_masked_feasibility, MaskMatrix};
use crate::plan::{enforce_forced_cells, linear_objective, SolverTag, TransportPlan};
use crate::sinkhorn::sinkhorn_masked_masses;

/// Per-iteration record of a Frank-Wolfe run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrankWolfeTrace {
    /// Objective at the initial plan followed by one entry per accepted step.
    pub objective_per_iteration: Vec<f64>,
    /// Fraction of the way moved toward each linear-minimization vertex
    /// (`1 - ω` when the update is written `ω π + (1 - ω) π'`).
    pub step_sizes: Vec<f64>,
    pub converged: bool,
}

fn check_gw_shapes(plan: ArrayView2<f64>, cs: &CostMatrix, ct: &CostMatrix) -> Result<()> {
    let (m, n) = plan.dim();
    if cs.dim() != (m, m) || ct.dim() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "plan {m}x{n} with intra costs {:?} / {:?}",
            cs.dim(),
            ct.dim()
        )));
    }
    Ok(())
}

/// Gradient of `L_gw` at `plan` (which need not be a coupling).
pub fn gw_gradient(plan: ArrayView2<f64>, cs: &CostMatrix, ct: &CostMatrix) -> Result<Array2<f64>> {
    check_gw_shapes(plan, cs, ct)?;
    let (cs, ct) = (cs.values(), ct.values());
    let r = plan.sum_axis(Axis(1));
    let c = plan.sum_axis(Axis(0));
    let cs2 = cs.mapv(|v| v * v);
    let ct2 = ct.mapv(|v| v * v);
    let a: Array1<f64> = cs2.dot(&r);
    let b: Array1<f64> = ct2.dot(&c);
    let cross = cs.dot(&plan).dot(&ct.t());
    let (m, n) = plan.dim();
    Ok(Array2::from_shape_fn((m, n), |(i, j)| {
        2.0 * (a[i] + b[j] - 2.0 * cross[[i, j]])
    }))
}

/// `L_gw(plan)`.
pub fn gw_loss(plan: ArrayView2<f64>, cs: &CostMatrix, ct: &CostMatrix) -> Result<f64> {
    let grad = gw_gradient(plan, cs, ct)?;
    Ok(0.5 * linear_objective(plan, grad.view()))
}

/// Quadruple-loop gradient, `O(m²n²)`. Kept as a reference path.
pub fn gw_gradient_naive(
    plan: ArrayView2<f64>,
    cs: &CostMatrix,
    ct: &CostMatrix,
) -> Result<Array2<f64>> {
    check_gw_shapes(plan, cs, ct)?;
    let (cs, ct) = (cs.values(), ct.values());
    let (m, n) = plan.dim();
    let mut grad = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..m {
                for l in 0..n {
                    let d = cs[[i, k]] - ct[[j, l]];
                    acc += plan[[k, l]] * d * d;
                }
            }
            grad[[i, j]] = 2.0 * acc;
        }
    }
    Ok(grad)
}

struct Objective<'a> {
    cs: &'a CostMatrix,
    ct: &'a CostMatrix,
    guide: Option<&'a CostMatrix>,
    alpha: f64,
}

impl Objective<'_> {
    fn value(&self, plan: ArrayView2<f64>) -> Result<f64> {
        let mut v = self.alpha * gw_loss(plan, self.cs, self.ct)?;
        if let Some(g) = self.guide {
            v += (1.0 - self.alpha) * linear_objective(plan, g.values());
        }
        Ok(v)
    }

    fn gradient(&self, plan: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut grad = gw_gradient(plan, self.cs, self.ct)? * self.alpha;
        if let Some(g) = self.guide {
            grad.scaled_add(1.0 - self.alpha, &g.values());
        }
        Ok(grad)
    }
}

/// Feasible dense start: `p qᵀ` restricted to the mask and rescaled onto the
/// masked polytope.
fn initial_plan(p: ndarray::ArrayView1<f64>, q: ndarray::ArrayView1<f64>, mask: &MaskMatrix) -> Result<Array2<f64>> {
    let (m, n) = mask.dim();
    let zero = CostMatrix::new(Array2::zeros((m, n)))?;
    let cfg = SolverConfig::builder()
        .epsilon(1.0)
        .tolerance(1e-14)
        .max_iterations(10_000)
        .build()?;
    let plan = sinkhorn_masked_masses(p, q, &zero, mask, &cfg)?;
    Ok(plan.into_values())
}

/// Frank-Wolfe over an explicit mask and optional guiding matrix.
#[allow(clippy::too_many_arguments)]
pub fn frank_wolfe_masked(
    p: ndarray::ArrayView1<f64>,
    q: ndarray::ArrayView1<f64>,
    cs: &CostMatrix,
    ct: &CostMatrix,
    guide: Option<&CostMatrix>,
    mask: &MaskMatrix,
    alpha: f64,
    cfg: &SolverConfig,
    lp_backend: Backend,
) -> Result<(TransportPlan, FrankWolfeTrace)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if cs.dim() != (p.len(), p.len()) || ct.dim() != (q.len(), q.len()) || mask.dim() != (p.len(), q.len()) {
        return Err(Error::ShapeMismatch(format!(
            "intra costs {:?} / {:?}, mask {:?} for masses ({}, {})",
            cs.dim(),
            ct.dim(),
            mask.dim(),
            p.len(),
            q.len()
        )));
    }
    check_total_mass(p, q)?;
    let objective = Objective {
        cs,
        ct,
        guide: if alpha < 1.0 { guide } else { None },
        alpha,
    };

    let mut plan = initial_plan(p, q, mask)?;
    enforce_forced_cells(&mut plan, mask, p, q);
    let mut value = objective.value(plan.view())?;
    let mut trace = FrankWolfeTrace {
        objective_per_iteration: vec![value],
        ..Default::default()
    };
    let tol = cfg.tolerance();
    let mut iterations = 0;

    for it in 1..=cfg.max_iterations() {
        iterations = it;
        let grad = objective.gradient(plan.view())?;
        // constant shifts leave the linear minimizer unchanged
        let lowest = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let shifted = if lowest < 0.0 { grad.mapv(|v| v - lowest) } else { grad.clone() };
        let vertex = solve_masked_masses(p, q, &CostMatrix::new(shifted)?, mask, cfg, lp_backend)?;
        let direction = &vertex.values() - &plan;
        let slope = linear_objective(grad.view(), direction.view());
        let scale = value.abs().max(f64::MIN_POSITIVE);
        if -slope <= tol * scale || slope >= 0.0 {
            trace.converged = true;
            break;
        }
        let curvature = alpha * gw_loss(direction.view(), cs, ct)?;
        let step = if curvature > 0.0 {
            (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let mut candidate = &plan + &(&direction * step);
        enforce_forced_cells(&mut candidate, mask, p, q);
        candidate.mapv_inplace(|v| v.max(0.0));
        let next = objective.value(candidate.view())?;
        if next > value {
            trace.converged = true;
            break;
        }
        let decrease = value - next;
        plan = candidate;
        value = next;
        trace.objective_per_iteration.push(value);
        trace.step_sizes.push(step);
        if decrease <= tol * scale {
            trace.converged = true;
            break;
        }
    }
    let result = TransportPlan::balanced(
        plan,
        p,
        q,
        value,
        SolverTag::FrankWolfe,
        iterations,
        trace.converged,
    );
    Ok((result, trace))
}

/// Keypoint-guided GW blend. `alpha = 1` drops the guiding term (masked GW);
/// with an empty pairing and `alpha = 1` this is plain GW.
#[allow(clippy::too_many_arguments)]
pub fn solve_kpg_rl_gw(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    alpha: f64,
    cfg: &SolverConfig,
    lp_backend: Backend,
) -> Result<(TransportPlan, FrankWolfeTrace)> {
    let mask = build_mask(p.len(), q.len(), kp)?;
    check_masked_feasibility(p.weights(), q.weights(), &mask, kp)?;
    let guide = if alpha < 1.0 {
        if kp.is_empty() {
            return Err(Error::EmptyKeypoints);
        }
        Some(kpg_guiding_matrix(source_intra, target_intra, kp, cfg)?)
    } else {
        None
    };
    frank_wolfe_masked(
        p.weights(),
        q.weights(),
        source_intra,
        target_intra,
        guide.as_ref(),
        &mask,
        alpha,
        cfg,
        lp_backend,
    )
}

/// Plain Gromov-Wasserstein (squared loss) from the independent coupling.
pub fn solve_gw(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    cfg: &SolverConfig,
    lp_backend: Backend,
) -> Result<(TransportPlan, FrankWolfeTrace)> {
    solve_kpg_rl_gw(
        p,
        q,
        source_intra,
        target_intra,
        &KeypointPairing::empty(),
        1.0,
        cfg,
        lp_backend,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{intra_cost, Metric};
    use ndarray::array;

    #[test]
    fn zero_costs_give_zero_gradient() {
        let z = CostMatrix::intra(Array2::zeros((3, 3))).unwrap();
        let plan = Array2::from_elem((3, 3), 1.0 / 9.0);
        assert!(gw_gradient(plan.view(), &z, &z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_plan_gives_zero_gradient() {
        let d = DiscreteDistribution::uniform(array![[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let c = intra_cost(&d, Metric::SqEuclidean).unwrap();
        let plan = Array2::zeros((4, 4));
        assert!(gw_gradient(plan.view(), &c, &c).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fully_keypointed_returns_diagonal() {
        let d = DiscreteDistribution::new(array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], array![0.2, 0.3, 0.5])
            .unwrap();
        let c = intra_cost(&d, Metric::SqEuclidean).unwrap();
        let kp = KeypointPairing::new(vec![(0, 0), (1, 1), (2, 2)]).unwrap();
        let (plan, trace) =
            solve_kpg_rl_gw(&d, &d, &c, &c, &kp, 0.5, &SolverConfig::default(), Backend::Lp).unwrap();
        assert_eq!(plan.iterations(), 1);
        assert!(trace.converged);
        for i in 0..3 {
            assert_eq!(plan.values()[[i, i]], d.weights()[i]);
        }
        let direct = 0.5 * gw_loss(plan.values(), &c, &c).unwrap();
        assert!((plan.objective() - direct).abs() < 1e-15);
    }

    #[test]
    fn alpha_bounds() {
        let d = DiscreteDistribution::uniform(array![[0.0], [1.0]]).unwrap();
        let c = intra_cost(&d, Metric::SqEuclidean).unwrap();
        let kp = KeypointPairing::new(vec![(0, 0)]).unwrap();
        let cfg = SolverConfig::default();
        assert!(solve_kpg_rl_gw(&d, &d, &c, &c, &kp, 0.0, &cfg, Backend::Lp).is_err());
        assert!(solve_kpg_rl_gw(&d, &d, &c, &c, &kp, 1.5, &cfg, Backend::Lp).is_err());
        assert_eq!(
            solve_kpg_rl_gw(&d, &d, &c, &c, &KeypointPairing::empty(), 0.5, &cfg, Backend::Lp).unwrap_err(),
            Error::EmptyKeypoints
        );
    }
}
