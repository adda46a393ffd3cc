//! Command-line front end.
//!
//! `kpg-ot solve` solves one problem read from files; `kpg-ot toy` runs a
//! method comparison on a generated scenario. Exit codes: 0 success, 1 input
//! error, 2 infeasible problem, 3 solver did not converge (outputs are still
//! written). `KPG_OT_THREADS` caps the worker threads (0 or unset = auto).

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::SolverConfig;
use crate::distribution::{DiscreteDistribution, KeypointPairing};
use crate::dual::solve_dual_kpg_rl;
use crate::error::{Error, Result};
use crate::exact::{solve_kp, solve_kpg_rl, solve_kpg_rl_kp, Backend};
use crate::gw::solve_kpg_rl_gw;
use crate::harness::{
    class_mass_fraction, dominant_matches, drop_target_class, gen_mixture_scenario, matching_accuracy,
    run_comparison, Method, ScenarioCosts, ToyScenario, DEFAULT_SEED, DEFAULT_SEPARATION,
};
use crate::io::{self, ConfigEcho, MatchingRow, MethodReport, Report};
use crate::partial::{entropic_dummy_warning, solve_partial_kpg_rl, DEFAULT_A};
use crate::plan::TransportPlan;
use crate::relation::Divergence;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kpg-ot", version, about = "Keypoint-guided optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one transport problem read from files.
    Solve(SolveArgs),
    /// Run a method comparison on a generated Gaussian-mixture scenario.
    Toy(ToyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Kp,
    Gw,
    KpgRl,
    KpgRlKp,
    KpgRlGw,
    PartialKpgRl,
    DualKpgRl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DivergenceArg {
    Js,
    KlSt,
    KlTs,
    L1,
    L2,
    Raw,
}

impl From<DivergenceArg> for Divergence {
    fn from(d: DivergenceArg) -> Self {
        match d {
            DivergenceArg::Js => Divergence::Js,
            DivergenceArg::KlSt => Divergence::KlSt,
            DivergenceArg::KlTs => Divergence::KlTs,
            DivergenceArg::L1 => Divergence::L1,
            DivergenceArg::L2 => Divergence::L2,
            DivergenceArg::Raw => Divergence::RawDist,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Lp,
    /// Linear-domain Sinkhorn.
    Sinkhorn,
    /// Log-domain Sinkhorn.
    SinkhornLog,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Lp => Backend::Lp,
            BackendArg::Sinkhorn => Backend::Sinkhorn,
            BackendArg::SinkhornLog => Backend::SinkhornLog,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// Entropic or L2 regularization weight.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Read --epsilon as a fraction of the largest objective entry.
    #[arg(long)]
    relative_epsilon: bool,
    /// Relation temperature as a fraction of the largest intra cost.
    #[arg(long)]
    rho: Option<f64>,
    /// Weight of the point-wise (or GW) term in blended models.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "js")]
    divergence: DivergenceArg,
    #[arg(long, value_enum, default_value = "lp")]
    backend: BackendArg,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Recorded in the report; the solvers themselves are deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Report wall-clock times (reports are then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let mut b = SolverConfig::builder()
            .relative_epsilon(self.relative_epsilon)
            .divergence(self.divergence.into())
            .seed(self.seed);
        if let Some(v) = self.epsilon {
            b = b.epsilon(v);
        }
        if let Some(v) = self.rho {
            b = b.rho(v);
        }
        if let Some(v) = self.alpha {
            b = b.alpha(v);
        }
        if let Some(v) = self.max_iterations {
            b = b.max_iterations(v);
        }
        if let Some(v) = self.tolerance {
            b = b.tolerance(v);
        }
        b.build()
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    method: SolveMethod,
    /// Source points CSV (`x0,x1,...[,weight][,label]`).
    #[arg(long)]
    source: PathBuf,
    /// Target points CSV.
    #[arg(long)]
    target: PathBuf,
    /// Keypoint pairs JSON (`{"indexing": 0, "pairs": [[i, j], ...]}`).
    #[arg(long)]
    keypoints: Option<PathBuf>,
    /// Mass to transport for partial-kpg-rl (default: the smaller total mass).
    #[arg(long = "mass-budget")]
    mass_budget: Option<f64>,
    /// Keep the weights as raw masses instead of normalizing each side.
    #[arg(long)]
    raw_mass: bool,
    /// Plan CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON output.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Fig1,
    Fig4,
    Fig5,
    Custom,
}

#[derive(Debug, Args)]
struct ToyArgs {
    #[arg(long, value_enum, default_value = "fig4")]
    scenario: ScenarioArg,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    points_per_class: Option<usize>,
    #[arg(long)]
    keypoints_per_class: Option<usize>,
    /// Radius of the circle carrying the class means.
    #[arg(long)]
    separation: Option<f64>,
    /// Comma-separated methods (default: kp,kpg-rl-kp; fig5: partial-kp,partial-kpg-rl).
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) | Error::InfeasibleMask { .. } => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

fn configure_threads() {
    let threads = std::env::var("KPG_OT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Toy(args) => cmd_toy(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn echo(cfg: &SolverConfig, backend: BackendArg, mass_budget: Option<f64>) -> ConfigEcho {
    ConfigEcho {
        epsilon: cfg.epsilon(),
        relative_epsilon: cfg.relative_epsilon(),
        rho: cfg.rho(),
        alpha: cfg.alpha(),
        max_iterations: cfg.max_iterations(),
        tolerance: cfg.tolerance(),
        divergence: cfg.divergence().name().to_string(),
        backend: backend
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default(),
        mass_budget,
        seed: cfg.seed(),
    }
}

fn method_report(
    method: &str,
    plan: &TransportPlan,
    accuracy: Option<f64>,
    wall_ms: Option<f64>,
    unshared: Option<f64>,
    plan_file: Option<String>,
) -> MethodReport {
    MethodReport {
        method: method.to_string(),
        solver: serde_json::to_value(plan.solver_tag())
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        objective: plan.objective(),
        row_marginal_error: plan.row_marginal_error(),
        col_marginal_error: plan.col_marginal_error(),
        iterations: plan.iterations(),
        converged: plan.converged(),
        accuracy,
        wall_ms,
        unshared_mass_fraction: unshared,
        plan_file,
    }
}

fn solve_once(
    args: &SolveArgs,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    kp: &KeypointPairing,
    cfg: &SolverConfig,
    warnings: &mut Vec<String>,
) -> Result<TransportPlan> {
    let backend: Backend = args.solver.backend.into();
    let costs = ScenarioCosts::between(p, q, cfg)?;
    let (cs, ct) = (&costs.source_intra, &costs.target_intra);
    let needs_cross = matches!(args.method, SolveMethod::Kp | SolveMethod::KpgRlKp);
    if needs_cross && p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    match args.method {
        SolveMethod::Kp => solve_kp(p, q, &costs.cross, kp, cfg, backend),
        SolveMethod::Gw => solve_kpg_rl_gw(p, q, cs, ct, kp, 1.0, cfg, backend).map(|r| r.0),
        SolveMethod::KpgRl => solve_kpg_rl(p, q, cs, ct, kp, cfg, backend),
        SolveMethod::KpgRlKp => solve_kpg_rl_kp(p, q, &costs.cross, cs, ct, kp, cfg.alpha(), cfg, backend),
        SolveMethod::KpgRlGw => solve_kpg_rl_gw(p, q, cs, ct, kp, cfg.alpha(), cfg, backend).map(|r| r.0),
        SolveMethod::PartialKpgRl => {
            let s = args
                .mass_budget
                .unwrap_or_else(|| p.total_mass().min(q.total_mass()));
            if backend != Backend::Lp {
                if let Some(w) = entropic_dummy_warning(cfg.epsilon(), DEFAULT_A) {
                    eprintln!("warning: {w}");
                    warnings.push(w);
                }
            }
            solve_partial_kpg_rl(p, q, cs, ct, kp, s, cfg, backend)
        }
        SolveMethod::DualKpgRl => solve_dual_kpg_rl(p, q, cs, ct, kp, cfg).map(|r| r.1),
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let cfg = args.solver.config()?;
    let src = io::read_points(&args.source)?;
    let tgt = io::read_points(&args.target)?;
    let p = src.distribution(args.raw_mass)?;
    let q = tgt.distribution(args.raw_mass)?;
    let kp = match &args.keypoints {
        Some(path) => io::read_keypoints(path)?,
        None => KeypointPairing::empty(),
    };
    kp.validate(p.weights(), q.weights())?;
    if args.mass_budget.is_some() && args.method != SolveMethod::PartialKpgRl {
        return Err(Error::InvalidConfig("--mass-budget applies to partial-kpg-rl only".into()));
    }

    let mut warnings = Vec::new();
    let start = Instant::now();
    let plan = solve_once(args, &p, &q, &kp, &cfg, &mut warnings)?;
    let wall_ms = args.solver.timing.then(|| start.elapsed().as_secs_f64() * 1e3);

    let accuracy = match (&src.labels, &tgt.labels) {
        (Some(ls), Some(lt)) => Some(matching_accuracy(plan.values(), ls, lt)?),
        _ => None,
    };
    if let Some(path) = &args.out {
        io::write_plan(path, plan.values())?;
    }
    let method = args
        .method
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    if let Some(path) = &args.report {
        let budget = (args.method == SolveMethod::PartialKpgRl)
            .then(|| args.mass_budget.unwrap_or_else(|| p.total_mass().min(q.total_mass())));
        let report = Report {
            command: "solve".into(),
            scenario: None,
            config: echo(&cfg, args.solver.backend, budget),
            results: vec![method_report(
                &method,
                &plan,
                accuracy,
                wall_ms,
                None,
                args.out.as_ref().map(|o| o.display().to_string()),
            )],
            warnings,
        };
        io::write_report(path, &report)?;
    }
    if !plan.converged() {
        eprintln!(
            "error: {method} did not converge in {} iterations (marginal error {:e}); plan written",
            plan.iterations(),
            plan.max_marginal_error()
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn build_scenario(args: &ToyArgs) -> Result<(ToyScenario, Option<usize>)> {
    let (classes, ppc, kpc) = match args.scenario {
        ScenarioArg::Fig1 => (3, 10, 1),
        _ => (3, 20, 1),
    };
    let classes = args.classes.unwrap_or(classes);
    let ppc = args.points_per_class.unwrap_or(ppc);
    let kpc = args.keypoints_per_class.unwrap_or(kpc);
    let separation = args.separation.unwrap_or(DEFAULT_SEPARATION);
    let seed = args.solver.seed;
    let mut full = gen_mixture_scenario(classes, ppc, kpc, 2, separation, seed)?;
    let name = args
        .scenario
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    if args.scenario == ScenarioArg::Fig5 {
        if classes < 3 {
            return Err(Error::InvalidParameters("fig5 needs at least 3 classes".into()));
        }
        let unshared = classes - 1;
        let mut s = drop_target_class(&full, unshared)?;
        s.description = format!("{name}: {}", s.description);
        return Ok((s, Some(unshared)));
    }
    full.description = format!("{name}: {}", full.description);
    Ok((full, None))
}

fn cmd_toy(args: &ToyArgs) -> Result<i32> {
    let cfg = args.solver.config()?;
    if args.solver.backend != BackendArg::Lp {
        return Err(Error::InvalidConfig(
            "toy runs choose each method's backend; --backend applies to solve".into(),
        ));
    }
    let default_methods = match args.scenario {
        ScenarioArg::Fig5 => "partial-kp,partial-kpg-rl",
        _ => "kp,kpg-rl-kp",
    };
    let methods = parse_methods(args.methods.as_deref().unwrap_or(default_methods))?;
    let (scenario, unshared) = build_scenario(args)?;

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    io::write_points(&dir.join("source.csv"), &scenario.source, Some(&scenario.source_labels))?;
    io::write_points(&dir.join("target.csv"), &scenario.target, Some(&scenario.target_labels))?;
    io::write_keypoints(&dir.join("keypoints.json"), &scenario.keypoints)?;

    let results = run_comparison(&scenario, &methods, &cfg)?;
    let matching = dir.join("matching.csv");
    let mut reports = Vec::with_capacity(results.len());
    let mut all_converged = true;
    for (k, r) in results.iter().enumerate() {
        let file = format!("plan_{}.csv", r.method.name());
        io::write_plan(&dir.join(&file), r.plan.values())?;
        let rows: Vec<MatchingRow> = dominant_matches(r.plan.values())
            .into_iter()
            .enumerate()
            .map(|(i, m)| MatchingRow {
                source_index: i,
                target_index: m.map(|(j, _)| j),
                mass: m.map_or(0.0, |(_, v)| v),
            })
            .collect();
        io::write_matching(
            &matching,
            r.method.name(),
            &rows,
            scenario.source.points(),
            scenario.target.points(),
            &scenario.source_labels,
            &scenario.target_labels,
            k > 0,
        )?;
        all_converged &= r.plan.converged();
        reports.push(method_report(
            r.method.name(),
            &r.plan,
            Some(r.accuracy),
            args.solver.timing.then_some(r.wall_ms),
            unshared.map(|c| class_mass_fraction(r.plan.values(), &scenario.source_labels, c)),
            Some(file),
        ));
    }
    if results.is_empty() {
        // keep the plot-data contract: header only
        io::write_matching(
            &matching,
            "",
            &[],
            scenario.source.points(),
            scenario.target.points(),
            &scenario.source_labels,
            &scenario.target_labels,
            false,
        )?;
    }
    let uses_budget = methods
        .iter()
        .any(|m| matches!(m, Method::PartialKp | Method::PartialKpgRl));
    let report = Report {
        command: "toy".into(),
        scenario: Some(scenario.description.clone()),
        config: echo(&cfg, args.solver.backend, uses_budget.then(|| scenario.budget())),
        results: reports,
        warnings: Vec::new(),
    };
    io::write_report(&dir.join("report.json"), &report)?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
