//! Gromov-Wasserstein matching of an isometric copy, plain and blended with
//! keypoint guidance.
//!
//! Run with `cargo run --release --example gromov_wasserstein`.

use kpg_ot::gw::{solve_gw, solve_kpg_rl_gw};
use kpg_ot::harness::fig1_scenario;
use kpg_ot::{intra_cost, Backend, DiscreteDistribution, Metric, SolverConfig};

fn main() -> kpg_ot::Result<()> {
    let s = fig1_scenario(2)?;
    // mirror the source: same distances, different coordinates
    let mirrored = s.source.points().mapv(|v| -v);
    let copy = DiscreteDistribution::uniform(mirrored)?;

    let cfg = SolverConfig::default();
    let cs = intra_cost(&s.source, Metric::SqEuclidean)?.max_normalized();
    let cc = intra_cost(&copy, Metric::SqEuclidean)?.max_normalized();
    let (plan, trace) = solve_gw(&s.source, &copy, &cs, &cc, &cfg, Backend::Lp)?;
    let hits = (0..s.source.len()).filter(|&i| plan.values()[[i, i]] > 0.5 / s.source.len() as f64).count();
    println!(
        "isometric copy: loss {:.3e} after {} steps, {hits}/{} points matched to themselves",
        plan.objective(),
        trace.objective_per_iteration.len(),
        s.source.len()
    );

    let ct = intra_cost(&s.target, Metric::SqEuclidean)?.max_normalized();
    let (plan, trace) = solve_kpg_rl_gw(&s.source, &s.target, &cs, &ct, &s.keypoints, 0.5, &cfg, Backend::Lp)?;
    let acc = kpg_ot::harness::matching_accuracy(plan.values(), &s.source_labels, &s.target_labels)?;
    println!("guided blend: objective {:.4}, accuracy {acc:.3}", plan.objective());
    for (k, obj) in trace.objective_per_iteration.iter().enumerate().take(8) {
        println!("  step {k}: {obj:.6}");
    }
    Ok(())
}
