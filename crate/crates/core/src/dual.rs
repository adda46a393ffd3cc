//! L2-regularized keypoint-guided transport in dual form.
//!
//! The primal minimizes `⟨π, G⟩ + ε Σ (M_ij π_ij)² / (p_i q_j)` over the
//! masked polytope. Its dual maximand over finite potentials is
//!
//! ```text
//! D(φ, ψ) = Σ φ_i p_i + Σ ψ_j q_j - (1/4ε) Σ M_ij (φ_i + ψ_j - G_ij)₊² p_i q_j
//! ```
//!
//! and the optimal plan is `(1/2ε) M_ij (φ_i + ψ_j - G_ij)₊ p_i q_j`.
//!
//! `D` is concave and piecewise quadratic. [`solve_dual`] ascends it with a
//! damped Newton direction (conjugate gradients on the generalized Hessian)
//! under an Armijo backtracking line search, falling back to exact block
//! maximization in `φ` then `ψ` whenever the Newton direction stalls.

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::config::SolverConfig;
use crate::cost::CostMatrix;
use crate::distribution::{DiscreteDistribution, KeypointPairing};
use crate::error::{Error, Result};
use crate::exact::{check_shapes, check_total_mass, kpg_guiding_matrix};
use crate::masking::{build_mask, check_masked_feasibility, MaskMatrix};
use crate::plan::{enforce_forced_cells, SolverTag, TransportPlan};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Dual potentials and the dual objective they attain.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub phi: Array1<f64>,
    pub psi: Array1<f64>,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖∇D‖∞` at the returned point.
    pub gradient_norm: f64,
}

fn check_inputs(
    phi: ArrayView1<f64>,
    psi: ArrayView1<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) -> Result<()> {
    check_shapes(p, q, g, mask)?;
    if phi.len() != p.len() || psi.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "potentials of length {} / {} for {} x {} problem",
            phi.len(),
            psi.len(),
            p.len(),
            q.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// Hinge matrix `M ⊙ (φ_i + ψ_j - G_ij)₊`.
fn hinge(
    phi: ArrayView1<f64>,
    psi: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
) -> Array2<f64> {
    let mut h = g.values().to_owned();
    Zip::indexed(&mut h)
        .and(mask.values())
        .for_each(|(i, j), v, &open| {
            *v = if open { (phi[i] + psi[j] - *v).max(0.0) } else { 0.0 };
        });
    h
}

fn objective_from_hinge(
    phi: ArrayView1<f64>,
    psi: ArrayView1<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    h: &Array2<f64>,
    epsilon: f64,
) -> f64 {
    let linear = phi.dot(&p) + psi.dot(&q);
    let mut quad = 0.0;
    for (i, row) in h.outer_iter().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in row.iter().enumerate() {
            acc += v * v * q[j];
        }
        quad += acc * p[i];
    }
    linear - quad / (4.0 * epsilon)
}

fn gradient_from_hinge(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    h: &Array2<f64>,
    epsilon: f64,
) -> (Array1<f64>, Array1<f64>) {
    let scale = 1.0 / (2.0 * epsilon);
    let (m, n) = h.dim();
    let mut gphi = p.to_owned();
    let mut gpsi = q.to_owned();
    for i in 0..m {
        for j in 0..n {
            let w = scale * h[[i, j]] * p[i] * q[j];
            gphi[i] -= w;
            gpsi[j] -= w;
        }
    }
    (gphi, gpsi)
}

/// Exact value of the dual maximand.
#[allow(clippy::too_many_arguments)]
pub fn dual_objective(
    phi: ArrayView1<f64>,
    psi: ArrayView1<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) -> Result<f64> {
    check_inputs(phi, psi, p, q, g, mask, epsilon)?;
    let h = hinge(phi, psi, g, mask);
    Ok(objective_from_hinge(phi, psi, p, q, &h, epsilon))
}

/// Gradient of the dual maximand in `(φ, ψ)`.
#[allow(clippy::too_many_arguments)]
pub fn dual_gradient(
    phi: ArrayView1<f64>,
    psi: ArrayView1<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_inputs(phi, psi, p, q, g, mask, epsilon)?;
    let h = hinge(phi, psi, g, mask);
    Ok(gradient_from_hinge(p, q, &h, epsilon))
}

/// Solves `Σ_k w_k (x - a_k)₊ = target` for `x`, with `target > 0` and
/// positive weights.
fn solve_hinge_equation(mut pts: Vec<(f64, f64)>, target: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut wsum, mut wa) = (0.0, 0.0);
    for k in 0..pts.len() {
        wsum += pts[k].1;
        wa += pts[k].1 * pts[k].0;
        let x = (target + wa) / wsum;
        if k + 1 == pts.len() || x <= pts[k + 1].0 {
            return x;
        }
    }
    unreachable!("hinge equation with no terms")
}

/// Exact maximization of the dual in `φ` for fixed `ψ`, then in `ψ`.
fn block_sweep(
    phi: &mut Array1<f64>,
    psi: &mut Array1<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) {
    let (m, n) = g.dim();
    let gv = g.values();
    let mv = mask.values();
    let target = 2.0 * epsilon;
    for i in 0..m {
        if p[i] <= 0.0 {
            continue;
        }
        let pts: Vec<(f64, f64)> = (0..n)
            .filter(|&j| mv[[i, j]] && q[j] > 0.0)
            .map(|j| (gv[[i, j]] - psi[j], q[j]))
            .collect();
        if !pts.is_empty() {
            phi[i] = solve_hinge_equation(pts, target);
        }
    }
    for j in 0..n {
        if q[j] <= 0.0 {
            continue;
        }
        let pts: Vec<(f64, f64)> = (0..m)
            .filter(|&i| mv[[i, j]] && p[i] > 0.0)
            .map(|i| (gv[[i, j]] - phi[i], p[i]))
            .collect();
        if !pts.is_empty() {
            psi[j] = solve_hinge_equation(pts, target);
        }
    }
}

/// Newton direction: preconditioned conjugate gradients on
/// `(-H + δI) d = ∇D`, where `-H` is the weighted Laplacian of the active
/// cells.
fn newton_direction(
    weights: &Array2<f64>,
    grad: &Array1<f64>,
    m: usize,
) -> Option<Array1<f64>> {
    let n = weights.ncols();
    let row_w: Array1<f64> = weights.sum_axis(ndarray::Axis(1));
    let col_w: Array1<f64> = weights.sum_axis(ndarray::Axis(0));
    let diag_max = row_w.iter().chain(col_w.iter()).fold(0.0_f64, |a, &b| a.max(b));
    if diag_max <= 0.0 {
        return None;
    }
    let delta = 1e-10 * diag_max;
    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::zeros(m + n);
        for i in 0..m {
            for j in 0..n {
                let w = weights[[i, j]];
                if w > 0.0 {
                    let s = w * (v[i] + v[m + j]);
                    out[i] += s;
                    out[m + j] += s;
                }
            }
        }
        out.scaled_add(delta, v);
        out
    };
    let precond: Array1<f64> = row_w
        .iter()
        .chain(col_w.iter())
        .map(|&d| 1.0 / (d + delta))
        .collect();

    let mut x = Array1::<f64>::zeros(m + n);
    let mut r = grad.clone();
    let mut z = &r * &precond;
    let mut d = z.clone();
    let mut rz = r.dot(&z);
    let gnorm = grad.dot(grad).sqrt();
    for _ in 0..(4 * (m + n)).max(50) {
        let ad = apply(&d);
        let curv = d.dot(&ad);
        if curv <= 0.0 {
            break;
        }
        let step = rz / curv;
        x.scaled_add(step, &d);
        r.scaled_add(-step, &ad);
        if r.dot(&r).sqrt() <= 1e-12 * gnorm {
            break;
        }
        z = &r * &precond;
        let rz_next = r.dot(&z);
        d = &z + &(rz_next / rz * &d);
        rz = rz_next;
    }
    Some(x)
}

/// Maximizes the dual to `‖∇D‖∞ < cfg.tolerance()`, starting from zero
/// potentials. On hitting the iteration cap the last iterate is returned
/// with `converged = false`.
pub fn solve_dual(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<PotentialPair> {
    let (m, n) = (p.len(), q.len());
    let mut phi = Array1::<f64>::zeros(m);
    let mut psi = Array1::<f64>::zeros(n);
    check_inputs(phi.view(), psi.view(), p, q, g, mask, epsilon)?;
    check_total_mass(p, q)?;

    // a first sweep activates the hinge so the Newton system is informative
    block_sweep(&mut phi, &mut psi, p, q, g, mask, epsilon);
    let mut h = hinge(phi.view(), psi.view(), g, mask);
    let mut value = objective_from_hinge(phi.view(), psi.view(), p, q, &h, epsilon);
    let scale = 1.0 / (2.0 * epsilon);
    let mut iterations = 1;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;

    while iterations <= cfg.max_iterations() {
        let (gphi, gpsi) = gradient_from_hinge(p, q, &h, epsilon);
        grad_norm = gphi.iter().chain(gpsi.iter()).fold(0.0_f64, |a, &b| a.max(b.abs()));
        if grad_norm < cfg.tolerance() {
            converged = true;
            break;
        }
        iterations += 1;
        let grad: Array1<f64> = gphi.iter().chain(gpsi.iter()).copied().collect();
        let weights = Array2::from_shape_fn((m, n), |(i, j)| {
            if h[[i, j]] > 0.0 {
                scale * p[i] * q[j]
            } else {
                0.0
            }
        });

        let mut accepted = false;
        if let Some(dir) = newton_direction(&weights, &grad, m) {
            let slope = grad.dot(&dir);
            if slope > 0.0 {
                let mut t = 1.0;
                for _ in 0..MAX_BACKTRACKS {
                    let cand_phi = &phi + &(t * &dir.slice(ndarray::s![..m]));
                    let cand_psi = &psi + &(t * &dir.slice(ndarray::s![m..]));
                    let cand_h = hinge(cand_phi.view(), cand_psi.view(), g, mask);
                    let cand =
                        objective_from_hinge(cand_phi.view(), cand_psi.view(), p, q, &cand_h, epsilon);
                    if cand >= value + ARMIJO * t * slope {
                        phi = cand_phi;
                        psi = cand_psi;
                        h = cand_h;
                        value = cand;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if !accepted {
            let (old_phi, old_psi) = (phi.clone(), psi.clone());
            block_sweep(&mut phi, &mut psi, p, q, g, mask, epsilon);
            h = hinge(phi.view(), psi.view(), g, mask);
            let next = objective_from_hinge(phi.view(), psi.view(), p, q, &h, epsilon);
            if next <= value && phi == old_phi && psi == old_psi {
                break;
            }
            value = next;
        }
    }
    if !(phi.iter().chain(psi.iter()).all(|v| v.is_finite()) && value.is_finite()) {
        return Err(Error::NumericalUnderflow(
            "dual potentials became non-finite".into(),
        ));
    }
    Ok(PotentialPair {
        phi,
        psi,
        dual_objective: value,
        iterations,
        converged,
        gradient_norm: grad_norm,
    })
}

/// Plan `(1/2ε) M ⊙ (φ_i + ψ_j - G_ij)₊ p_i q_j`, with honest marginal
/// errors and the L2-regularized primal objective.
///
/// For converged potentials, cells that are the only open cell of their row
/// or column are set to the mass the constraints force on them.
pub fn recover_plan(
    pot: &PotentialPair,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) -> Result<TransportPlan> {
    check_inputs(pot.phi.view(), pot.psi.view(), p, q, g, mask, epsilon)?;
    let mut plan = hinge(pot.phi.view(), pot.psi.view(), g, mask);
    let scale = 1.0 / (2.0 * epsilon);
    Zip::indexed(&mut plan).for_each(|(i, j), v| *v *= scale * p[i] * q[j]);
    if pot.converged {
        // cells fixed by the mask alone are exact at the optimum; remove the
        // rounding left by finite-precision potentials
        enforce_forced_cells(&mut plan, mask, p, q);
    }
    let objective = primal_objective_l2(plan.view(), p, q, g, mask, epsilon)?;
    Ok(TransportPlan::balanced(
        plan,
        p,
        q,
        objective,
        SolverTag::DualL2,
        pot.iterations,
        pot.converged,
    ))
}

/// `⟨π, G⟩ + ε Σ (M_ij π_ij)² / (p_i q_j)`; cells with `p_i q_j = 0` must
/// carry no mass.
pub fn primal_objective_l2(
    plan: ndarray::ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    epsilon: f64,
) -> Result<f64> {
    check_shapes(p, q, g, mask)?;
    if plan.dim() != g.dim() {
        return Err(Error::ShapeMismatch(format!(
            "plan {:?} vs cost {:?}",
            plan.dim(),
            g.dim()
        )));
    }
    let gv = g.values();
    let mv = mask.values();
    let mut total = 0.0;
    for ((i, j), &v) in plan.indexed_iter() {
        if !mv[[i, j]] || v == 0.0 {
            continue;
        }
        let w = p[i] * q[j];
        if w <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += v * gv[[i, j]] + epsilon * v * v / w;
    }
    Ok(total)
}

/// L2-regularized KPG-RL end to end: guiding matrix, mask, dual ascent and
/// plan recovery. `cfg.epsilon()` is the regularization weight (relative
/// to `max G` when `cfg.relative_epsilon()` is set).
pub fn solve_dual_kpg_rl(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    cfg: &SolverConfig,
) -> Result<(PotentialPair, TransportPlan)> {
    if kp.is_empty() {
        return Err(Error::EmptyKeypoints);
    }
    let mask = build_mask(p.len(), q.len(), kp)?;
    check_masked_feasibility(p.weights(), q.weights(), &mask, kp)?;
    let g = kpg_guiding_matrix(source_intra, target_intra, kp, cfg)?;
    let eps = cfg.effective_epsilon(g.max());
    let pot = solve_dual(p.weights(), q.weights(), &g, &mask, eps, cfg)?;
    let plan = recover_plan(&pot, p.weights(), q.weights(), &g, &mask, eps)?;
    Ok((pot, plan))
}
