//! # kpg-ot
//!
//! Keypoint-guided optimal transport between discrete distributions.
//!
//! Given two weighted point clouds and a few annotated matched keypoint pairs,
//! the solvers compute transport plans that
//!
//! - match every keypoint to its partner exactly, through a binary mask on the
//!   plan ([`masking`]), and
//! - carry that guidance to the other points by preserving each point's
//!   relation to the keypoints ([`relation`]).
//!
//! ## Solvers
//!
//! | Entry point | Model |
//! |-------------|-------|
//! | [`exact::solve_kpg_rl`] | relation-preserving transport, LP or Sinkhorn |
//! | [`exact::solve_kpg_rl_kp`] | blend with a point-wise cost |
//! | [`gw::solve_kpg_rl_gw`] | blend with Gromov-Wasserstein distortion (Frank-Wolfe) |
//! | [`partial::solve_partial_kpg_rl`] | partial transport of a mass budget |
//! | [`dual::solve_dual`] | L2-regularized dual with plan recovery |
//! | [`exact::lp_masked`] | exact masked transport (network simplex) |
//! | [`sinkhorn::sinkhorn_masked_log`] | log-domain masked Sinkhorn |
//!
//! [`projection`] maps source points through a plan, and [`harness`] builds
//! the Gaussian-mixture toy scenarios used to compare methods.
//!
//! Indices are 0-based everywhere.

#![allow(clippy::too_many_arguments)]

pub mod cli;
pub mod config;
pub mod cost;
pub mod distribution;
pub mod dual;
pub mod error;
pub mod exact;
pub mod gw;
pub mod harness;
pub mod io;
pub mod masking;
pub mod partial;
pub mod plan;
pub mod projection;
pub mod relation;
mod simplex;
pub mod sinkhorn;

pub use config::{SolverConfig, SolverConfigBuilder};
pub use cost::{intra_cost, pairwise_cost, CostMatrix, GuidingMatrix, Metric};
pub use distribution::{make_distribution, DiscreteDistribution, KeypointPairing};
pub use error::{Error, Result};
pub use exact::{lp_masked, solve_kp, solve_kpg_rl, solve_kpg_rl_kp, Backend};
pub use masking::{build_mask, check_masked_feasibility, MaskMatrix};
pub use plan::{SolverTag, TransportPlan};
pub use relation::{guiding_matrix, relation_scores, Divergence, RelationMatrix, RelationMode};
pub use sinkhorn::{sinkhorn_masked, sinkhorn_masked_log};
