//! Gaussian-mixture toy scenarios and method comparisons.
//!
//! Randomness comes from a single `ChaCha8Rng` seeded with the scenario seed,
//! so a scenario is bit-reproducible on every platform. Normal samples use
//! `rand_distr::StandardNormal`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::cost::{intra_cost, pairwise_cost, CostMatrix, Metric};
use crate::distribution::{DiscreteDistribution, KeypointPairing};
use crate::error::{Error, Result};
use crate::exact::{solve_kp, solve_kpg_rl, solve_kpg_rl_kp, Backend};
use crate::gw::{solve_gw, solve_kpg_rl_gw};
use crate::partial::{solve_partial_kp, solve_partial_kpg_rl};
use crate::plan::TransportPlan;

/// Default radius of the circle carrying the component means.
pub const DEFAULT_SEPARATION: f64 = 8.0;
/// Default seed of the named scenarios.
pub const DEFAULT_SEED: u64 = 0;

/// Two labeled point clouds with matched keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScenario {
    pub source: DiscreteDistribution,
    pub target: DiscreteDistribution,
    pub source_labels: Vec<usize>,
    pub target_labels: Vec<usize>,
    pub classes: usize,
    pub keypoints: KeypointPairing,
    pub description: String,
    pub seed: u64,
    /// Mass budget for partial methods; `None` means the smaller total mass.
    pub mass_budget: Option<f64>,
}

impl ToyScenario {
    /// Budget used by partial methods.
    pub fn budget(&self) -> f64 {
        self.mass_budget
            .unwrap_or_else(|| self.source.total_mass().min(self.target.total_mass()))
    }

    /// Keeps only the first `count` keypoint pairs.
    pub fn with_keypoints(&self, count: usize) -> Self {
        let mut out = self.clone();
        out.keypoints = self.keypoints.truncated(count);
        out.description = format!("{} ({} keypoint pairs)", self.description, out.keypoints.len());
        out
    }

    /// Exchanges the roles of source and target.
    pub fn swapped(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            source_labels: self.target_labels.clone(),
            target_labels: self.source_labels.clone(),
            classes: self.classes,
            keypoints: self.keypoints.swapped(),
            description: format!("{} (swapped)", self.description),
            seed: self.seed,
            mass_budget: self.mass_budget,
        }
    }
}

fn sample_domain(
    rng: &mut ChaCha8Rng,
    classes: usize,
    points_per_class: usize,
    dim: usize,
    separation: f64,
) -> (Array2<f64>, Vec<usize>, Array2<f64>) {
    let rotation = rng.random::<f64>() * TAU;
    let means = Array2::from_shape_fn((classes, dim), |(k, d)| {
        let angle = rotation + TAU * k as f64 / classes as f64;
        match d {
            0 => separation * angle.cos(),
            1 => separation * angle.sin(),
            _ => 0.0,
        }
    });
    let count = classes * points_per_class;
    let mut points = Array2::zeros((count, dim));
    let mut labels = Vec::with_capacity(count);
    for k in 0..classes {
        for r in 0..points_per_class {
            let row = k * points_per_class + r;
            for d in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                points[[row, d]] = means[[k, d]] + z;
            }
            labels.push(k);
        }
    }
    (points, labels, means)
}

/// Indices of the `count` points of class `k` nearest its mean, nearest
/// first (ties to the lower index).
fn nearest_to_mean(points: ArrayView2<f64>, labels: &[usize], means: &Array2<f64>, k: usize, count: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == k)
        .map(|(i, _)| {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(means.row(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, i)
        })
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.into_iter().take(count).map(|(_, i)| i).collect()
}

/// Two Gaussian mixtures with `classes` unit-variance components whose means
/// sit on a circle of radius `separation` (first two coordinates), each
/// domain rotated by its own random angle. Keypoints pair, class by class,
/// the points nearest each component mean. Both sides carry uniform
/// probability weights.
pub fn gen_mixture_scenario(
    classes: usize,
    points_per_class: usize,
    keypoints_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<ToyScenario> {
    if classes < 2 || points_per_class == 0 || dim < 2 {
        return Err(Error::InvalidParameters(format!(
            "need classes >= 2, points_per_class >= 1, dim >= 2; got {classes}, {points_per_class}, {dim}"
        )));
    }
    if keypoints_per_class > points_per_class {
        return Err(Error::InvalidParameters(format!(
            "{keypoints_per_class} keypoints per class exceeds {points_per_class} points per class"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (xs, ls, ms) = sample_domain(&mut rng, classes, points_per_class, dim, separation);
    let (xt, lt, mt) = sample_domain(&mut rng, classes, points_per_class, dim, separation);

    let mut pairs = Vec::with_capacity(classes * keypoints_per_class);
    for k in 0..classes {
        let a = nearest_to_mean(xs.view(), &ls, &ms, k, keypoints_per_class);
        let b = nearest_to_mean(xt.view(), &lt, &mt, k, keypoints_per_class);
        pairs.extend(a.into_iter().zip(b));
    }
    Ok(ToyScenario {
        source: DiscreteDistribution::uniform(xs)?,
        target: DiscreteDistribution::uniform(xt)?,
        source_labels: ls,
        target_labels: lt,
        classes,
        keypoints: KeypointPairing::new(pairs)?,
        description: format!(
            "{classes}-class mixture, points per class {points_per_class}, keypoints per class {keypoints_per_class}, separation {separation}"
        ),
        seed,
        mass_budget: None,
    })
}

/// Small three-class scenario with one keypoint pair per class.
pub fn fig1_scenario(seed: u64) -> Result<ToyScenario> {
    let mut s = gen_mixture_scenario(3, 10, 1, 2, DEFAULT_SEPARATION, seed)?;
    s.description = format!("fig1: {}", s.description);
    Ok(s)
}

/// Three classes, 20 points per class, one keypoint pair per class.
pub fn fig4_scenario(seed: u64) -> Result<ToyScenario> {
    let mut s = gen_mixture_scenario(3, 20, 1, 2, DEFAULT_SEPARATION, seed)?;
    s.description = format!("fig4: {}", s.description);
    Ok(s)
}

/// Source with three classes, target with only the first two; keypoints in
/// the two shared classes. See [`drop_target_class`].
pub fn fig5_scenario(seed: u64) -> Result<ToyScenario> {
    let full = gen_mixture_scenario(3, 20, 1, 2, DEFAULT_SEPARATION, seed)?;
    let mut s = drop_target_class(&full, 2)?;
    s.description = format!("fig5: {}", s.description);
    Ok(s)
}

/// Removes class `class` from the target, together with its keypoint pairs,
/// turning the source points of that class into outliers.
///
/// Every point then carries the same raw mass `1 / #source`, so paired
/// keypoints keep equal mass, and the budget is the target's total mass.
/// With three means 120° apart the removed class lies on the perpendicular
/// bisector of the other two and relates equally to both keypoints.
pub fn drop_target_class(full: &ToyScenario, class: usize) -> Result<ToyScenario> {
    if class >= full.classes {
        return Err(Error::InvalidParameters(format!(
            "class {class} out of range for {} classes",
            full.classes
        )));
    }
    let keep: Vec<usize> = (0..full.target.len()).filter(|&j| full.target_labels[j] != class).collect();
    let mut new_index = vec![usize::MAX; full.target.len()];
    for (k, &j) in keep.iter().enumerate() {
        new_index[j] = k;
    }
    let target_points = full.target.points().select(ndarray::Axis(0), &keep);
    let target_labels: Vec<usize> = keep.iter().map(|&j| full.target_labels[j]).collect();
    let mass = 1.0 / full.source.len() as f64;
    let source = DiscreteDistribution::uniform_mass(full.source.points().to_owned(), mass)?;
    let target = DiscreteDistribution::uniform_mass(target_points, mass)?;
    let pairs: Vec<(usize, usize)> = full
        .keypoints
        .pairs()
        .iter()
        .filter(|&&(i, _)| full.source_labels[i] != class)
        .map(|&(i, j)| (i, new_index[j]))
        .collect();
    let budget = target.total_mass();
    Ok(ToyScenario {
        source,
        target,
        source_labels: full.source_labels.clone(),
        target_labels,
        classes: full.classes,
        keypoints: KeypointPairing::new(pairs)?,
        description: format!("{}, target class {class} removed", full.description),
        seed: full.seed,
        mass_budget: Some(budget),
    })
}

/// Mass-weighted fraction of plan mass on same-class cells; 0 for an empty
/// plan.
pub fn matching_accuracy(plan: ArrayView2<f64>, source_labels: &[usize], target_labels: &[usize]) -> Result<f64> {
    let (m, n) = plan.dim();
    if source_labels.len() != m || target_labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "plan {m}x{n} with {} source / {} target labels",
            source_labels.len(),
            target_labels.len()
        )));
    }
    let (mut hit, mut total) = (0.0, 0.0);
    for ((i, j), &v) in plan.indexed_iter() {
        total += v;
        if source_labels[i] == target_labels[j] {
            hit += v;
        }
    }
    Ok(if total > 0.0 { hit / total } else { 0.0 })
}

/// Fraction of the plan's mass sent from source points of class `class`.
pub fn class_mass_fraction(plan: ArrayView2<f64>, source_labels: &[usize], class: usize) -> f64 {
    let total = plan.sum();
    if total <= 0.0 {
        return 0.0;
    }
    let sent: f64 = plan
        .outer_iter()
        .zip(source_labels)
        .filter(|(_, &l)| l == class)
        .map(|(row, _)| row.sum())
        .sum();
    sent / total
}

/// For each source point, the target receiving most of its mass (ties to
/// the lower index) and that mass; `None` when the row is empty.
pub fn dominant_matches(plan: ArrayView2<f64>) -> Vec<Option<(usize, f64)>> {
    plan.outer_iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in row.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best
        })
        .collect()
}

/// Methods available to [`run_comparison`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain transport on the cross-domain cost.
    Kp,
    /// Plain Gromov-Wasserstein.
    Gw,
    /// Relation-preserving transport, exact.
    KpgRlLp,
    /// Relation-preserving transport, entropic.
    KpgRlSh,
    KpgRlKp,
    KpgRlGw,
    PartialKp,
    PartialKpgRl,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Kp,
        Method::Gw,
        Method::KpgRlLp,
        Method::KpgRlSh,
        Method::KpgRlKp,
        Method::KpgRlGw,
        Method::PartialKp,
        Method::PartialKpgRl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kp => "kp",
            Method::Gw => "gw",
            Method::KpgRlLp => "kpg-rl-lp",
            Method::KpgRlSh => "kpg-rl-sh",
            Method::KpgRlKp => "kpg-rl-kp",
            Method::KpgRlGw => "kpg-rl-gw",
            Method::PartialKp => "partial-kp",
            Method::PartialKpgRl => "partial-kpg-rl",
        }
    }

    /// Comma-separated list of every method name.
    pub fn valid_names() -> String {
        Self::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = if key == "kpg-rl" { "kpg-rl-lp".to_string() } else { key };
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method '{s}'; valid methods: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// Outcome of one method on a scenario.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub plan: TransportPlan,
    pub accuracy: f64,
    pub wall_ms: f64,
}

/// Costs shared by all methods of a comparison.
///
/// The cross cost and the intra costs used as Gromov-Wasserstein inputs are
/// divided by their largest entry so that blends with the guiding matrix do
/// not depend on the coordinate scale.
#[derive(Debug, Clone)]
pub struct ScenarioCosts {
    pub cross: CostMatrix,
    pub source_intra: CostMatrix,
    pub target_intra: CostMatrix,
}

impl ScenarioCosts {
    pub fn new(scenario: &ToyScenario, cfg: &SolverConfig) -> Result<Self> {
        Self::between(&scenario.source, &scenario.target, cfg)
    }

    /// Costs for two distributions. The intra costs always exist; the cross
    /// cost needs a shared ambient dimension and is zero otherwise.
    pub fn between(
        source: &DiscreteDistribution,
        target: &DiscreteDistribution,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let cross = if source.dim() == target.dim() {
            pairwise_cost(source, target, Metric::SqEuclidean)?.max_normalized()
        } else {
            CostMatrix::new(Array2::zeros((source.len(), target.len())))?
        };
        Ok(Self {
            cross,
            source_intra: intra_cost(source, cfg.intra_metric())?.max_normalized(),
            target_intra: intra_cost(target, cfg.intra_metric())?.max_normalized(),
        })
    }
}

/// Runs one method on a scenario.
pub fn run_method(
    scenario: &ToyScenario,
    costs: &ScenarioCosts,
    method: Method,
    cfg: &SolverConfig,
) -> Result<MethodResult> {
    let (p, q, kp) = (&scenario.source, &scenario.target, &scenario.keypoints);
    let (cs, ct) = (&costs.source_intra, &costs.target_intra);
    let start = Instant::now();
    let plan = match method {
        Method::Kp => solve_kp(p, q, &costs.cross, &KeypointPairing::empty(), cfg, Backend::Lp)?,
        Method::Gw => solve_gw(p, q, cs, ct, cfg, Backend::Lp)?.0,
        Method::KpgRlLp => solve_kpg_rl(p, q, cs, ct, kp, cfg, Backend::Lp)?,
        Method::KpgRlSh => solve_kpg_rl(p, q, cs, ct, kp, cfg, Backend::SinkhornLog)?,
        Method::KpgRlKp => solve_kpg_rl_kp(p, q, &costs.cross, cs, ct, kp, cfg.alpha(), cfg, Backend::Lp)?,
        Method::KpgRlGw => solve_kpg_rl_gw(p, q, cs, ct, kp, cfg.alpha(), cfg, Backend::Lp)?.0,
        Method::PartialKp => solve_partial_kp(p, q, &costs.cross, scenario.budget(), cfg, Backend::Lp)?,
        Method::PartialKpgRl => {
            solve_partial_kpg_rl(p, q, cs, ct, kp, scenario.budget(), cfg, Backend::Lp)?
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let accuracy = matching_accuracy(plan.values(), &scenario.source_labels, &scenario.target_labels)?;
    Ok(MethodResult {
        method,
        plan,
        accuracy,
        wall_ms,
    })
}

/// Runs every method (in parallel) and reports in input order. Fails with
/// the first error in input order.
pub fn run_comparison(
    scenario: &ToyScenario,
    methods: &[Method],
    cfg: &SolverConfig,
) -> Result<Vec<MethodResult>> {
    if methods.is_empty() {
        return Ok(Vec::new());
    }
    let costs = ScenarioCosts::new(scenario, cfg)?;
    methods
        .par_iter()
        .map(|&m| run_method(scenario, &costs, m, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
