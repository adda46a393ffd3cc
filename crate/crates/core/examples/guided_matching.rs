//! Match two small point clouds given a few corresponding keypoints.
//!
//! The target is a rotated and shifted copy of the source, so its points live
//! in a different frame and squared distances across domains are useless.
//! The guided plan still recovers the correspondence from the keypoints.
//!
//! Run with `cargo run --example guided_matching`.

use kpg_ot::{intra_cost, solve_kpg_rl, Backend, DiscreteDistribution, KeypointPairing, Metric, SolverConfig};
use ndarray::{array, Array2};

fn main() -> kpg_ot::Result<()> {
    let source = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [2.0, 2.5], [-1.0, 1.5]];
    let (c, s) = (0.6_f64.cos(), 0.6_f64.sin());
    let target = Array2::from_shape_fn(source.dim(), |(i, d)| {
        let (x, y) = (source[[i, 0]], source[[i, 1]]);
        if d == 0 { c * x - s * y + 10.0 } else { s * x + c * y - 4.0 }
    });

    let p = DiscreteDistribution::uniform(source)?;
    let q = DiscreteDistribution::uniform(target)?;
    let kp = KeypointPairing::new(vec![(0, 0), (3, 3), (5, 5)])?;

    let cfg = SolverConfig::default();
    let cs = intra_cost(&p, Metric::SqEuclidean)?;
    let ct = intra_cost(&q, Metric::SqEuclidean)?;
    let plan = solve_kpg_rl(&p, &q, &cs, &ct, &kp, &cfg, Backend::Lp)?;

    println!("guided plan (rows: source, cols: target)");
    for row in plan.values().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    println!("objective {:.6}, marginal error {:.1e}", plan.objective(), plan.max_marginal_error());
    for &(i, j) in kp.pairs() {
        println!("keypoint {i} -> {j}: {:.4} of {:.4}", plan.values()[[i, j]], p.weights()[i]);
    }
    Ok(())
}
