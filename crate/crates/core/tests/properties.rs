mod common;

use kpg_ot::exact::{kpg_guiding_matrix, lp_masked_masses};
use kpg_ot::io::{format_plan, parse_plan};
use kpg_ot::relation::divergence_value;
use kpg_ot::{
    build_mask, guiding_matrix, intra_cost, relation_scores, solve_kpg_rl, Backend, CostMatrix, Divergence, Metric,
    RelationMode, SolverConfig,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

use common::*;

fn instance_strategy() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 3usize..12, 3usize..12, 0usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lp_plans_are_feasible_and_keep_keypoints((seed, m, n, k) in instance_strategy()) {
        let mut r = rng(seed);
        // with every point of one side a keypoint the rest cannot be matched
        let k = k.min(m - 1).min(n - 1);
        let inst = random_instance(&mut r, m, n, k, 2);
        let cfg = SolverConfig::default();
        let cs = intra_cost(&inst.source, Metric::SqEuclidean).unwrap();
        let ct = intra_cost(&inst.target, Metric::SqEuclidean).unwrap();
        if k == 0 {
            return Ok(());
        }
        let plan = solve_kpg_rl(&inst.source, &inst.target, &cs, &ct, &inst.kp, &cfg, Backend::Lp).unwrap();
        prop_assert!(plan.max_marginal_error() <= 1e-12);
        prop_assert!(plan.values().iter().all(|&v| v >= 0.0));
        let p = inst.source.weights();
        for &(i, j) in inst.kp.pairs() {
            prop_assert_eq!(plan.values()[[i, j]], p[i]);
        }
        // the objective is the plan against the guiding matrix
        let g = kpg_guiding_matrix(&cs, &ct, &inst.kp, &cfg).unwrap();
        let direct: f64 = (&plan.values() * &g.values()).sum();
        prop_assert!((direct - plan.objective()).abs() <= 1e-12);
    }

    #[test]
    fn lp_objective_is_translation_invariant(seed in any::<u64>(), shift in -5.0f64..5.0) {
        // adding a constant to every cost adds it times the total mass
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 6, 7, 1, 2);
        let cost = Array2::from_shape_fn((6, 7), |(i, j)| ((i * 7 + j) as f64 * 0.37).sin().abs());
        let mask = build_mask(6, 7, &inst.kp).unwrap();
        let (p, q) = (inst.source.weights(), inst.target.weights());
        let a = lp_masked_masses(p, q, &CostMatrix::new(cost.clone()).unwrap(), &mask).unwrap();
        let shifted = cost.mapv(|v| v + shift + 5.0);
        let b = lp_masked_masses(p, q, &CostMatrix::new(shifted).unwrap(), &mask).unwrap();
        prop_assert!((b.objective() - a.objective() - (shift + 5.0)).abs() <= 1e-10);
    }

    #[test]
    fn relation_rows_lie_on_the_simplex(seed in any::<u64>(), n in 2usize..15, rho in 0.01f64..2.0) {
        let mut r = rng(seed);
        let d = kpg_ot::DiscreteDistribution::uniform(random_points(&mut r, n, 3)).unwrap();
        let c = intra_cost(&d, Metric::SqEuclidean).unwrap();
        let kp = sample_distinct(&mut r, n, n.min(3));
        let rel = relation_scores(&c, &kp, rho, RelationMode::Softmax).unwrap();
        for row in rel.values().rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
        // the temperature scales with the largest cost
        let scaled = CostMatrix::intra(c.values().mapv(|v| 7.5 * v)).unwrap();
        let rel2 = relation_scores(&scaled, &kp, rho, RelationMode::Softmax).unwrap();
        let diff = (&rel.values() - &rel2.values()).mapv(f64::abs).fold(0.0_f64, |a, &b| a.max(b));
        prop_assert!(diff <= 1e-12);
    }

    #[test]
    fn js_guidance_is_bounded_and_symmetric(seed in any::<u64>(), m in 2usize..10, n in 2usize..10) {
        let mut r = rng(seed);
        let a = kpg_ot::DiscreteDistribution::uniform(random_points(&mut r, m, 2)).unwrap();
        let b = kpg_ot::DiscreteDistribution::uniform(random_points(&mut r, n, 2)).unwrap();
        let k = m.min(n).min(3);
        let (ka, kb) = (sample_distinct(&mut r, m, k), sample_distinct(&mut r, n, k));
        let ra = relation_scores(&intra_cost(&a, Metric::SqEuclidean).unwrap(), &ka, 0.1, RelationMode::Softmax).unwrap();
        let rb = relation_scores(&intra_cost(&b, Metric::SqEuclidean).unwrap(), &kb, 0.1, RelationMode::Softmax).unwrap();
        let g = guiding_matrix(&ra, &rb, Divergence::Js).unwrap();
        let gt = guiding_matrix(&rb, &ra, Divergence::Js).unwrap();
        prop_assert!(g.values().iter().all(|&v| (0.0..=std::f64::consts::LN_2 + 1e-15).contains(&v)));
        prop_assert_eq!(g.values().t().to_owned(), gt.values().to_owned());
    }

    #[test]
    fn js_matches_its_definition(x in prop::collection::vec(0.01f64..1.0, 2..6)) {
        let n = x.len();
        let a = Array1::from_vec(x.clone()) / x.iter().sum::<f64>();
        let b = Array1::from_shape_fn(n, |i| (i + 1) as f64) / (n * (n + 1) / 2) as f64;
        let m = (&a + &b) / 2.0;
        let kl = |u: &Array1<f64>, v: &Array1<f64>| u.iter().zip(v).map(|(p, q)| p * (p / q).ln()).sum::<f64>();
        let expected = 0.5 * kl(&a, &m) + 0.5 * kl(&b, &m);
        prop_assert!((divergence_value(Divergence::Js, a.view(), b.view()) - expected).abs() <= 1e-12);
    }

    #[test]
    fn dense_plan_text_round_trips_exactly(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let mut r = rng(seed);
        let plan = random_points(&mut r, m, n).mapv(|v| if v < 0.0 { 0.0 } else { v * 1e-3 });
        let back = parse_plan(&format_plan(plan.view())).unwrap();
        prop_assert_eq!(back, plan);
    }
}

#[test]
fn sparse_plan_text_round_trips_exactly() {
    let n = kpg_ot::io::DENSE_LIMIT + 1;
    let plan = Array2::from_shape_fn((n, n + 2), |(i, j)| if i == j { 1.0 / (3.0 + i as f64) } else { 0.0 });
    let text = format_plan(plan.view());
    assert!(text.starts_with("i,j,value") || text.starts_with('#'));
    assert_eq!(parse_plan(&text).unwrap(), plan);
}
