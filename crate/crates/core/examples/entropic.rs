//! Entropic solvers against the exact one as the regularization shrinks.
//!
//! The linear-domain Sinkhorn iteration can underflow once epsilon is small
//! relative to the cost spread; the log-domain variant does not.
//!
//! Run with `cargo run --release --example entropic`.

use kpg_ot::exact::{kpg_guiding_matrix, lp_masked_masses};
use kpg_ot::harness::fig4_scenario;
use kpg_ot::sinkhorn::{sinkhorn_masked_log_masses, sinkhorn_masked_masses};
use kpg_ot::{build_mask, intra_cost, Metric, SolverConfig};

fn main() -> kpg_ot::Result<()> {
    let s = fig4_scenario(1)?;
    let base = SolverConfig::builder().relative_epsilon(true).max_iterations(50_000).build()?;
    let cs = intra_cost(&s.source, Metric::SqEuclidean)?;
    let ct = intra_cost(&s.target, Metric::SqEuclidean)?;
    let g = kpg_guiding_matrix(&cs, &ct, &s.keypoints, &base)?;
    let mask = build_mask(s.source.len(), s.target.len(), &s.keypoints)?;
    let (p, q) = (s.source.weights(), s.target.weights());

    let exact = lp_masked_masses(p, q, &g, &mask)?.objective();
    println!("exact objective {exact:.6}");
    println!("{:>8}  {:>12}  {:>12}", "eps/maxG", "linear", "log");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let cfg = base.to_builder().epsilon(eps).build()?;
        let lin = match sinkhorn_masked_masses(p, q, &g, &mask, &cfg) {
            Ok(plan) => format!("{:.6}", plan.objective()),
            Err(e) => format!("({e})").chars().take(12).collect(),
        };
        let log = sinkhorn_masked_log_masses(p, q, &g, &mask, &cfg)?;
        println!(
            "{eps:>8.0e}  {lin:>12}  {:>12.6}{}",
            log.objective(),
            if log.converged() { "" } else { " (iteration cap)" }
        );
    }
    Ok(())
}
