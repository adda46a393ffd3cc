//! Carry source points into the target domain along a guided plan.
//!
//! Run with `cargo run --release --example barycentric_mapping`.

use kpg_ot::harness::{fig4_scenario, run_comparison, Method};
use kpg_ot::projection::barycentric_map;
use kpg_ot::SolverConfig;
use ndarray::{Array2, Axis};

fn class_means(points: &Array2<f64>, labels: &[usize], classes: usize) -> Array2<f64> {
    let mut means = Array2::zeros((classes, points.ncols()));
    let mut counts = vec![0.0; classes];
    for (row, &l) in points.axis_iter(Axis(0)).zip(labels) {
        if row.iter().all(|v| v.is_finite()) {
            means.row_mut(l).scaled_add(1.0, &row);
            counts[l] += 1.0;
        }
    }
    for (mut m, c) in means.axis_iter_mut(Axis(0)).zip(counts) {
        m /= c;
    }
    means
}

fn main() -> kpg_ot::Result<()> {
    let s = fig4_scenario(0)?;
    let cfg = SolverConfig::default();
    let r = &run_comparison(&s, &[Method::KpgRlKp], &cfg)?[0];
    let image = barycentric_map(&r.plan, &s.target)?;

    let mapped = class_means(&image.points, &s.source_labels, s.classes);
    let truth = class_means(&s.target.points().to_owned(), &s.target_labels, s.classes);
    for c in 0..s.classes {
        println!(
            "class {c}: mapped mean ({:7.3}, {:7.3})  target mean ({:7.3}, {:7.3})",
            mapped[[c, 0]],
            mapped[[c, 1]],
            truth[[c, 0]],
            truth[[c, 1]]
        );
    }
    Ok(())
}
