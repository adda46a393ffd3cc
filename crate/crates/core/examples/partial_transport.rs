//! Partial transport when one source class has no counterpart in the target,
//! and outlier detection on the receiving side.
//!
//! Run with `cargo run --release --example partial_transport`.

use kpg_ot::harness::{class_mass_fraction, fig5_scenario, run_comparison, Method};
use kpg_ot::projection::received_mass_outliers;
use kpg_ot::SolverConfig;

fn main() -> kpg_ot::Result<()> {
    let cfg = SolverConfig::default();
    let s = fig5_scenario(0)?;
    println!("{}", s.description);
    println!("budget {:.3} of source mass {:.3}", s.budget(), s.source.total_mass());

    for r in run_comparison(&s, &[Method::PartialKp, Method::PartialKpgRl], &cfg)? {
        let unshared = class_mass_fraction(r.plan.values(), &s.source_labels, 2);
        println!(
            "{:<16} accuracy {:.3}  mass from the unshared class {:.4}",
            r.method, r.accuracy, unshared
        );
    }

    // swap the roles: the extra class now sits in the target and should
    // receive little mass
    let sw = s.swapped();
    let r = &run_comparison(&sw, &[Method::PartialKpgRl], &cfg)?[0];
    let labeled = sw.keypoints.target_indices();
    let outliers = sw.target_labels.iter().filter(|&&l| l == 2).count();
    let eta = outliers as f64 / (sw.target.len() - labeled.len()) as f64;
    let flagged = received_mass_outliers(&r.plan, eta, &labeled)?;
    let correct = flagged.iter().filter(|&&j| sw.target_labels[j] == 2).count();
    println!("flagged {} targets as outliers, {correct} of them from the extra class", flagged.len());
    Ok(())
}
