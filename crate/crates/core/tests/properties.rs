//! Randomized invariants across the sensor, coverage utility, oracles and
//! evaluation.

use std::f64::consts::{FRAC_PI_2, TAU};

use proptest::prelude::*;

use infogather::eval::{evaluate, rollout};
use infogather::oracles::{gcb_plan, oracle_act, q_value_to_go, OracleKind};
use infogather::policy::{OraclePolicy, RandomPolicy};
use infogather::reference::marching_ray_cells;
use infogather::sensor::{raycast, trace_ray, SensorConfig};
use infogather::utility::{feasible_actions, travel_cost, CoverageState, Instance, ProblemSpec};
use infogather::worldgen::{generate, GenConfig, Generator, Node, NodeId, Split, WorldEntry};

const GENERATORS: [&str; 3] = ["parallel-lines", "distributed-blocks", "poisson-forest"];

fn entry(seed: u64, nodes: usize) -> WorldEntry {
    let g = Generator::by_name(GENERATORS[(seed % 3) as usize]).unwrap();
    let cfg = GenConfig::new((48, 48), g).with_nodes(nodes);
    generate(&cfg, 1, seed, Split::Test).unwrap().entries.remove(0)
}

/// A generated instance whose node set sees at least one surface cell.
fn instance(seed: u64, nodes: usize, range: f64) -> Instance {
    let sensor = SensorConfig { max_range: range, ..Default::default() };
    (0..)
        .map(|k| entry(seed * 1000 + k, nodes))
        .find_map(|e| Instance::new(e.world, e.nodes, sensor).ok())
        .unwrap()
}

fn subset(mask: u64, n: usize) -> Vec<NodeId> {
    (0..n).filter(|&i| mask >> (i % 64) & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_is_monotone_and_submodular(seed in 0u64..5000, b_mask: u64, a_mask: u64, v in 0usize..30) {
        let inst = instance(seed, 30, 8.0);
        let b = subset(b_mask, 30);
        let a: Vec<NodeId> = b.iter().copied().filter(|&i| a_mask >> i & 1 == 1).collect();
        let f = |s: &[NodeId]| inst.covered_count(s).unwrap() as i64;
        let plus = |s: &[NodeId]| { let mut s = s.to_vec(); s.push(v); s };
        prop_assert!(f(&a) <= f(&b));
        let (da, db) = (f(&plus(&a)) - f(&a), f(&plus(&b)) - f(&b));
        prop_assert!(da >= db && db >= 0);
    }

    #[test]
    fn incremental_coverage_matches_recomputation(seed in 0u64..5000, order in proptest::collection::vec(0usize..25, 1..12)) {
        let inst = instance(seed, 25, 8.0);
        let spec = ProblemSpec { allow_revisits: true, ..ProblemSpec::unconstrained(20) };
        let mut s = CoverageState::new(&inst);
        let mut total = s.coverage(&inst);
        for &v in &order {
            if v == s.current() { continue; }
            prop_assert!(feasible_actions(&s, inst.nodes(), &spec).contains(&v));
            total += s.apply(&inst, v).unwrap();
            prop_assert_eq!(s.covered_count(), inst.covered_count(s.visited()).unwrap());
            prop_assert!((total - inst.coverage(s.visited()).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn traversal_matches_marching_oracle(seed in 0u64..5000, x in 0.0f64..48.0, y in 0.0f64..48.0, bearing in 0.0f64..TAU, range in 0.5f64..30.0) {
        let world = entry(seed, 1).world;
        prop_assume!(world.cell_at(x, y).is_some_and(|c| !world.is_occupied(c)));
        prop_assert_eq!(trace_ray(&world, x, y, bearing, range), marching_ray_cells(&world, x, y, bearing, range));
    }

    #[test]
    fn measurements_rotate_with_the_world(seed in 0u64..5000, x in 0.0f64..48.0, y in 0.0f64..48.0) {
        let world = entry(seed, 1).world;
        prop_assume!(world.cell_at(x, y).is_some_and(|c| !world.is_occupied(c)));
        let cfg = SensorConfig { num_rays: 64, ..Default::default() };
        let m = raycast(&world, &Node { id: 0, x, y, heading: 0.0 }, &cfg).unwrap();
        let rotated = world.rotate90();
        let (h, w) = (world.height(), world.width());
        let node = Node { id: 0, x: h as f64 - y, y: x, heading: FRAC_PI_2 };
        let r = raycast(&rotated, &node, &cfg).unwrap();
        let mut expect: Vec<usize> = m.hit_cells.iter().map(|&c| (c % w) * h + (h - 1 - c / w)).collect();
        expect.sort_unstable();
        prop_assert_eq!(r.hit_cells, expect);
    }

    #[test]
    fn longer_range_sees_a_superset(seed in 0u64..5000, x in 0.0f64..48.0, y in 0.0f64..48.0, r1 in 0.5f64..10.0, extra in 0.0f64..10.0) {
        let world = entry(seed, 1).world;
        prop_assume!(world.cell_at(x, y).is_some_and(|c| !world.is_occupied(c)));
        let node = Node { id: 0, x, y, heading: 0.0 };
        let near = raycast(&world, &node, &SensorConfig { max_range: r1, ..Default::default() }).unwrap();
        let far = raycast(&world, &node, &SensorConfig { max_range: r1 + extra, ..Default::default() }).unwrap();
        prop_assert!(near.hit_cells.iter().all(|c| far.hit_cells.binary_search(c).is_ok()));
        prop_assert!(near.free_cells.iter().all(|c| far.free_cells.binary_search(c).is_ok()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn value_to_go_telescopes_and_grows_with_horizon(seed in 0u64..5000, budget in proptest::option::of(8.0f64..30.0), k in 1usize..6) {
        let inst = instance(seed, 30, 8.0);
        let spec = ProblemSpec { budget, ..ProblemSpec::unconstrained(8) };
        let kind = OracleKind::for_spec(&spec);
        let s = CoverageState::new(&inst);
        for a in feasible_actions(&s, inst.nodes(), &spec) {
            let q = q_value_to_go(kind, &inst, &s, a, k, &spec).unwrap();
            let mut next = s.clone();
            let r = next.apply(&inst, a).unwrap();
            let rest = match oracle_act(kind, &inst, &next, &spec) {
                Ok(b) => q_value_to_go(kind, &inst, &next, b, k - 1, &spec).unwrap(),
                Err(_) => 0.0,
            };
            prop_assert!((q - (r + rest)).abs() < 1e-12);
            prop_assert!(q <= q_value_to_go(kind, &inst, &s, a, k + 1, &spec).unwrap() + 1e-12);
        }
    }

    #[test]
    fn gcb_plans_fit_the_budget(seed in 0u64..5000, budget in 2.0f64..30.0) {
        let inst = instance(seed, 30, 8.0);
        let spec = ProblemSpec::budgeted(10, budget);
        let s = CoverageState::new(&inst);
        if let Ok(plan) = gcb_plan(&inst, &s, &spec) {
            let mut path = vec![s.current()];
            path.extend(&plan.nodes);
            prop_assert!(travel_cost(&path, inst.nodes()).unwrap() <= budget);
            prop_assert!(plan.cost <= budget);
        }
    }

    #[test]
    fn trajectories_agree_with_recomputed_coverage(seed in 0u64..5000, budget in proptest::option::of(6.0f64..25.0)) {
        let inst = instance(seed, 40, 8.0);
        let spec = ProblemSpec { budget, ..ProblemSpec::unconstrained(12) };
        for t in [
            rollout(&RandomPolicy, &inst, &spec, seed, 0).unwrap(),
            rollout(&OraclePolicy(OracleKind::for_spec(&spec)), &inst, &spec, seed, 0).unwrap(),
        ] {
            let nodes = t.nodes();
            for (i, step) in t.steps.iter().enumerate() {
                prop_assert!((step.cumulative - inst.coverage(&nodes[..i + 2]).unwrap()).abs() < 1e-12);
                prop_assert!(step.cumulative <= 1.0 + 1e-12);
            }
            if let Some(b) = budget {
                prop_assert!(travel_cost(&nodes, inst.nodes()).unwrap() <= b);
            }
        }
    }
}

#[test]
fn evaluation_is_order_independent() {
    let worlds: Vec<Instance> = (0..6).map(|s| instance(s, 30, 8.0)).collect();
    let spec = ProblemSpec::unconstrained(8);
    let oracle = OraclePolicy(OracleKind::Greedy);
    let (a, _) = evaluate(&oracle, &worlds, &spec, 3).unwrap();
    let reversed: Vec<Instance> = worlds.iter().rev().cloned().collect();
    let (b, _) = evaluate(&oracle, &reversed, &spec, 3).unwrap();
    let mut fa: Vec<f64> = worlds.iter().map(|w| rollout(&oracle, w, &spec, 0, 0).unwrap().final_reward()).collect();
    let mut fb: Vec<f64> = reversed.iter().map(|w| rollout(&oracle, w, &spec, 0, 0).unwrap().final_reward()).collect();
    fa.sort_by(f64::total_cmp);
    fb.sort_by(f64::total_cmp);
    assert_eq!(fa, fb);
    assert!((a.final_mean - b.final_mean).abs() < 1e-12);
    assert_eq!(a.final_median, b.final_median);
}
