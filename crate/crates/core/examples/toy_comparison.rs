//! Every method on the three-class toy problem, averaged over seeds.
//!
//! Run with `cargo run --release --example toy_comparison [seeds]`.

use kpg_ot::harness::{fig4_scenario, run_comparison, Method};
use kpg_ot::SolverConfig;

fn main() -> kpg_ot::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let methods = [Method::Kp, Method::Gw, Method::KpgRlLp, Method::KpgRlSh, Method::KpgRlKp, Method::KpgRlGw];
    let cfg = SolverConfig::default();
    let mut totals = vec![(0.0, 0.0); methods.len()];
    for seed in 0..seeds {
        let s = fig4_scenario(seed)?;
        for (k, r) in run_comparison(&s, &methods, &cfg)?.iter().enumerate() {
            totals[k].0 += r.accuracy;
            totals[k].1 += r.wall_ms;
        }
    }
    println!("{:<10} {:>9} {:>9}", "method", "accuracy", "ms");
    for (m, (acc, ms)) in methods.iter().zip(totals) {
        println!("{:<10} {:>9.3} {:>9.1}", m.name(), acc / seeds as f64, ms / seeds as f64);
    }
    Ok(())
}
