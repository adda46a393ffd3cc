//! Exact masked transport and the keypoint-guided pipelines built on it.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::cost::{CostMatrix, GuidingMatrix};
use crate::distribution::{DiscreteDistribution, KeypointPairing, MASS_TOL};
use crate::error::{Error, Result};
use crate::masking::{build_mask, check_masked_feasibility, MaskMatrix};
use crate::plan::{enforce_forced_cells, linear_objective, SolverTag, TransportPlan};
use crate::relation::guiding_from_intra;
use crate::simplex::transport_simplex;
use crate::sinkhorn::{sinkhorn_masked_log_masses, sinkhorn_masked_masses};

/// Solver used for linear objectives over the masked polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Lp,
    /// Entropic Sinkhorn in the linear domain.
    Sinkhorn,
    /// Entropic Sinkhorn in the log domain.
    SinkhornLog,
}

pub(crate) fn check_total_mass(p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<()> {
    let (sp, sq) = (p.sum(), q.sum());
    if (sp - sq).abs() > MASS_TOL {
        return Err(Error::Infeasible(format!(
            "total masses differ: {sp} vs {sq}"
        )));
    }
    Ok(())
}

pub(crate) fn check_shapes(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
) -> Result<()> {
    let want = (p.len(), q.len());
    if objective.dim() != want || mask.dim() != want {
        return Err(Error::ShapeMismatch(format!(
            "objective {:?}, mask {:?}, masses {want:?}",
            objective.dim(),
            mask.dim()
        )));
    }
    Ok(())
}

/// Exact vertex solution of `min <M ⊙ π, objective>` over the masked
/// transportation polytope, on raw mass vectors.
pub fn lp_masked_masses(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
) -> Result<TransportPlan> {
    check_shapes(p, q, objective, mask)?;
    check_total_mass(p, q)?;
    let sol = transport_simplex(p, q, objective.values(), mask)?;
    let mut flows = sol.flows;
    enforce_forced_cells(&mut flows, mask, p, q);
    let value = linear_objective(flows.view(), objective.values());
    Ok(TransportPlan::balanced(
        flows,
        p,
        q,
        value,
        SolverTag::NetworkSimplex,
        sol.pivots,
        true,
    ))
}

pub fn lp_masked(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    objective: &CostMatrix,
    mask: &MaskMatrix,
) -> Result<TransportPlan> {
    lp_masked_masses(p.weights(), q.weights(), objective, mask)
}

/// Dispatches a linear masked problem to the requested backend.
pub fn solve_masked_masses(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    mask: &MaskMatrix,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    match backend {
        Backend::Lp => lp_masked_masses(p, q, objective, mask),
        Backend::Sinkhorn => sinkhorn_masked_masses(p, q, objective, mask, cfg),
        Backend::SinkhornLog => sinkhorn_masked_log_masses(p, q, objective, mask, cfg),
    }
}

/// Guiding matrix for a pairing, using the divergence and temperature in `cfg`.
pub fn kpg_guiding_matrix(
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    cfg: &SolverConfig,
) -> Result<GuidingMatrix> {
    guiding_from_intra(
        source_intra,
        target_intra,
        &kp.source_indices(),
        &kp.target_indices(),
        cfg.rho(),
        cfg.divergence(),
    )
}

fn check_intra(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
) -> Result<()> {
    if source_intra.dim() != (p.len(), p.len()) || target_intra.dim() != (q.len(), q.len()) {
        return Err(Error::ShapeMismatch(format!(
            "intra costs {:?} / {:?} for {} source and {} target points",
            source_intra.dim(),
            target_intra.dim(),
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Relation scores, guiding matrix, mask and the chosen backend, end to end.
pub fn solve_kpg_rl(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    check_intra(p, q, source_intra, target_intra)?;
    if kp.is_empty() {
        return Err(Error::EmptyKeypoints);
    }
    let mask = build_mask(p.len(), q.len(), kp)?;
    check_masked_feasibility(p.weights(), q.weights(), &mask, kp)?;
    let g = kpg_guiding_matrix(source_intra, target_intra, kp, cfg)?;
    solve_masked_masses(p.weights(), q.weights(), &g, &mask, cfg, backend)
}

/// Blended objective `alpha * C + (1 - alpha) * G` over the masked polytope.
#[allow(clippy::too_many_arguments)]
pub fn solve_kpg_rl_kp(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cross_cost: &CostMatrix,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    alpha: f64,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    check_intra(p, q, source_intra, target_intra)?;
    if kp.is_empty() {
        return Err(Error::EmptyKeypoints);
    }
    let mask = build_mask(p.len(), q.len(), kp)?;
    check_masked_feasibility(p.weights(), q.weights(), &mask, kp)?;
    let g = kpg_guiding_matrix(source_intra, target_intra, kp, cfg)?;
    let objective = cross_cost.blend(&g, alpha)?;
    solve_masked_masses(p.weights(), q.weights(), &objective, &mask, cfg, backend)
}

/// Plain (or keypoint-masked) transport on a cross-domain cost.
pub fn solve_kp(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cross_cost: &CostMatrix,
    kp: &KeypointPairing,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    let mask = build_mask(p.len(), q.len(), kp)?;
    check_masked_feasibility(p.weights(), q.weights(), &mask, kp)?;
    solve_masked_masses(p.weights(), q.weights(), cross_cost, &mask, cfg, backend)
}
