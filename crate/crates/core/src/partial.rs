//! Partial transport of a mass budget `s`, reduced to a balanced masked
//! problem by adding one dummy point on each side.
//!
//! The source dummy carries `|q|₁ - s` and the target dummy `|p|₁ - s`. Dummy
//! borders cost `ξ`, the dummy-to-dummy corner costs `2ξ + A` with `A > 0`,
//! and keypoint rows and columns are closed toward the dummies so keypoints
//! are always transported in full. When the keypoint masses on each side stay
//! strictly below `s`, the optimal balanced plan never uses the corner and its
//! upper-left `m × n` block is an optimal partial plan.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::config::SolverConfig;
use crate::cost::CostMatrix;
use crate::distribution::{DiscreteDistribution, KeypointPairing, MASS_TOL};
use crate::error::{Error, Result};
use crate::exact::{kpg_guiding_matrix, solve_masked_masses, Backend};
use crate::masking::{build_mask, MaskMatrix};
use crate::plan::{linear_objective, SolverTag, TransportPlan};

/// Default border cost for dummy points.
pub const DEFAULT_XI: f64 = 0.0;
/// Default extra corner cost for the dummy-to-dummy cell.
pub const DEFAULT_A: f64 = 1.0;

/// The balanced problem equivalent to a partial one.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedProblem {
    pub p_bar: Array1<f64>,
    pub q_bar: Array1<f64>,
    pub g_bar: CostMatrix,
    pub m_bar: MaskMatrix,
    pub xi: f64,
    pub a: f64,
    pub s: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn augment(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: &CostMatrix,
    mask: &MaskMatrix,
    kp: &KeypointPairing,
    s: f64,
    xi: f64,
    a: f64,
) -> Result<AugmentedProblem> {
    let (m, n) = (p.len(), q.len());
    if g.dim() != (m, n) || mask.dim() != (m, n) {
        return Err(Error::ShapeMismatch(format!(
            "objective {:?}, mask {:?}, masses ({m}, {n})",
            g.dim(),
            mask.dim()
        )));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::NonPositiveA(a));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "dummy border cost must be finite and >= 0, got {xi}"
        )));
    }
    kp.validate(p, q)?;
    let (mass_p, mass_q) = (p.sum(), q.sum());
    let max = mass_p.min(mass_q);
    if !(s >= 0.0 && s <= max + MASS_TOL) {
        return Err(Error::InvalidMassBudget { budget: s, max });
    }
    let kp_p = kp.source_mass(p);
    if kp_p >= s {
        return Err(Error::KeypointMassExceedsBudget {
            side: "source",
            keypoint_mass: kp_p,
            budget: s,
        });
    }
    let kp_q = kp.target_mass(q);
    if kp_q >= s {
        return Err(Error::KeypointMassExceedsBudget {
            side: "target",
            keypoint_mass: kp_q,
            budget: s,
        });
    }

    let dummy = |v: f64| if v.abs() <= MASS_TOL { 0.0 } else { v };
    let mut p_bar = Array1::zeros(m + 1);
    p_bar.slice_mut(s![..m]).assign(&p);
    p_bar[m] = dummy(mass_q - s);
    let mut q_bar = Array1::zeros(n + 1);
    q_bar.slice_mut(s![..n]).assign(&q);
    q_bar[n] = dummy(mass_p - s);

    let mut g_bar = Array2::from_elem((m + 1, n + 1), xi);
    g_bar.slice_mut(s![..m, ..n]).assign(&g.values());
    g_bar[[m, n]] = 2.0 * xi + a;

    let mut m_bar = Array2::from_elem((m + 1, n + 1), true);
    m_bar.slice_mut(s![..m, ..n]).assign(&mask.values());
    for &(i, j) in kp.pairs() {
        m_bar[[i, n]] = false;
        m_bar[[m, j]] = false;
    }

    Ok(AugmentedProblem {
        p_bar,
        q_bar,
        g_bar: CostMatrix::new(g_bar)?,
        m_bar: MaskMatrix::from_bools(m_bar),
        xi,
        a,
        s,
    })
}

/// Warning text when an entropic backend is used with `ε > A / 10`.
pub fn entropic_dummy_warning(epsilon: f64, a: f64) -> Option<String> {
    (epsilon > a / 10.0).then(|| {
        format!("epsilon {epsilon} exceeds A/10 = {}; dummy routing will be diffuse", a / 10.0)
    })
}

/// Partial plan together with the balanced plan it was cut from.
#[derive(Debug, Clone)]
pub struct PartialSolution {
    pub plan: TransportPlan,
    pub augmented: TransportPlan,
}

impl PartialSolution {
    /// Mass on the dummy-to-dummy cell.
    pub fn corner_mass(&self) -> f64 {
        let (r, c) = self.augmented.dim();
        self.augmented.values()[[r - 1, c - 1]]
    }
}

/// Partial transport of `objective` with an explicit dummy parameterization.
#[allow(clippy::too_many_arguments)]
pub fn solve_partial_with(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    kp: &KeypointPairing,
    s: f64,
    xi: f64,
    a: f64,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<PartialSolution> {
    let (m, n) = (p.len(), q.len());
    let mask = build_mask(m, n, kp)?;
    let aug = augment(p, q, objective, &mask, kp, s, xi, a)?;
    let augmented = solve_masked_masses(
        aug.p_bar.view(),
        aug.q_bar.view(),
        &aug.g_bar,
        &aug.m_bar,
        cfg,
        backend,
    )?;
    let mut block = augmented.values().slice(s![..m, ..n]).to_owned();
    mask.apply(&mut block);
    let tag = match backend {
        Backend::Lp => SolverTag::PartialNetworkSimplex,
        Backend::Sinkhorn | Backend::SinkhornLog => SolverTag::PartialSinkhorn,
    };
    let value = linear_objective(block.view(), objective.values());
    let plan = TransportPlan::partial(
        block,
        p,
        q,
        kp,
        value,
        tag,
        augmented.iterations(),
        augmented.converged(),
    );
    // entropic plans are only held to the constraints once they converge
    let tol = match backend {
        Backend::Lp => 1e-9,
        _ => 1e-9_f64.max(10.0 * cfg.tolerance()),
    };
    let checked = backend == Backend::Lp || plan.converged();
    if checked && plan.max_marginal_error() > tol {
        return Err(Error::TheoremViolation(format!(
            "marginal violation {:e}",
            plan.max_marginal_error()
        )));
    }
    if backend == Backend::Lp && (plan.total_mass() - s).abs() > 1e-9 {
        return Err(Error::TheoremViolation(format!(
            "transported mass {} differs from budget {s}",
            plan.total_mass()
        )));
    }
    Ok(PartialSolution { plan, augmented })
}

/// Partial transport with the default dummy parameters.
pub fn solve_partial(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    objective: &CostMatrix,
    kp: &KeypointPairing,
    s: f64,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    solve_partial_with(p, q, objective, kp, s, DEFAULT_XI, DEFAULT_A, cfg, backend).map(|sol| sol.plan)
}

/// Relation-guided partial transport of mass `s`.
#[allow(clippy::too_many_arguments)]
pub fn solve_partial_kpg_rl(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    kp: &KeypointPairing,
    s: f64,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    if kp.is_empty() {
        return Err(Error::EmptyKeypoints);
    }
    let g = kpg_guiding_matrix(source_intra, target_intra, kp, cfg)?;
    solve_partial(p.weights(), q.weights(), &g, kp, s, cfg, backend)
}

/// Plain partial transport on a cross-domain cost (no keypoints).
pub fn solve_partial_kp(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cross_cost: &CostMatrix,
    s: f64,
    cfg: &SolverConfig,
    backend: Backend,
) -> Result<TransportPlan> {
    solve_partial(
        p.weights(),
        q.weights(),
        cross_cost,
        &KeypointPairing::empty(),
        s,
        cfg,
        backend,
    )
}
