//! Quadratically regularized transport solved through its dual potentials.
//!
//! Unlike entropic plans, the recovered plan is sparse.
//!
//! Run with `cargo run --release --example dual_l2`.

use kpg_ot::dual::solve_dual_kpg_rl;
use kpg_ot::harness::fig1_scenario;
use kpg_ot::{intra_cost, Metric, SolverConfig};

fn main() -> kpg_ot::Result<()> {
    let s = fig1_scenario(0)?;
    let cs = intra_cost(&s.source, Metric::SqEuclidean)?;
    let ct = intra_cost(&s.target, Metric::SqEuclidean)?;
    for eps in [0.05, 0.005, 0.0005] {
        let cfg = SolverConfig::builder().epsilon(eps).relative_epsilon(true).build()?;
        let (pot, plan) = solve_dual_kpg_rl(&s.source, &s.target, &cs, &ct, &s.keypoints, &cfg)?;
        let (m, n) = plan.dim();
        println!(
            "eps {eps:<7} dual {:.6}  primal {:.6}  iterations {:>3}  nonzeros {}/{}",
            pot.dual_objective,
            plan.objective(),
            pot.iterations,
            plan.support_size(),
            m * n
        );
    }
    Ok(())
}
