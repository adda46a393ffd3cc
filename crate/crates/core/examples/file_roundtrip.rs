//! Write a problem to disk in the command-line formats, solve it, and read
//! the plan back.
//!
//! Run with `cargo run --example file_roundtrip`.

use kpg_ot::harness::{fig1_scenario, ScenarioCosts};
use kpg_ot::{io, solve_kpg_rl, Backend, SolverConfig};

fn main() -> kpg_ot::Result<()> {
    let dir = std::env::temp_dir().join("kpg-ot-example");
    std::fs::create_dir_all(&dir).map_err(|e| kpg_ot::Error::Io(e.to_string()))?;
    let s = fig1_scenario(0)?;
    io::write_points(&dir.join("source.csv"), &s.source, Some(&s.source_labels))?;
    io::write_points(&dir.join("target.csv"), &s.target, Some(&s.target_labels))?;
    io::write_keypoints(&dir.join("keypoints.json"), &s.keypoints)?;

    let p = io::read_points(&dir.join("source.csv"))?.distribution(false)?;
    let q = io::read_points(&dir.join("target.csv"))?.distribution(false)?;
    let kp = io::read_keypoints(&dir.join("keypoints.json"))?;
    let cfg = SolverConfig::default();
    let costs = ScenarioCosts::between(&p, &q, &cfg)?;
    let plan = solve_kpg_rl(&p, &q, &costs.source_intra, &costs.target_intra, &kp, &cfg, Backend::Lp)?;

    let path = dir.join("plan.csv");
    io::write_plan(&path, plan.values())?;
    let back = io::read_plan(&path)?;
    println!("wrote {} ({} x {}), round trip exact: {}", path.display(), back.nrows(), back.ncols(), back == plan.values());
    println!("same problem from the shell:");
    println!(
        "  kpg-ot solve --method kpg-rl --source {0}/source.csv --target {0}/target.csv --keypoints {0}/keypoints.json",
        dir.display()
    );
    Ok(())
}
