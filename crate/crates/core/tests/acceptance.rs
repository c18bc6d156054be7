//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Runs without the libtest harness so the lines
//! always reach the terminal.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use infogather::baselines::{HeuristicPolicy, Metric, DEFAULT_MOTION_PENALTY};
use infogather::eval::{evaluate, instances, write_curve, write_final, EvalSummary, Trajectory};
use infogather::learner::{fit, load_policy, save_policy, ForestConfig, LearntPolicy, RegressionDataset};
use infogather::policy::{OraclePolicy, Policy};
use infogather::oracles::OracleKind;
use infogather::sensor::SensorConfig;
use infogather::training::{train, Algorithm, TrainConfig};
use infogather::utility::{travel_cost, Instance, ProblemSpec};
use infogather::verify::run_suite;
use infogather::worldgen::{generate, load_dataset, save_dataset, CellEncoding, GenConfig, Generator, Split};

const SEED: u64 = 1;
const EVAL_SEED: u64 = 99;
/// Desk-scale sensor: with the default 12 m range a 64×64 world is almost
/// fully visible from a few nodes and every policy saturates.
const RANGE: f64 = 6.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, limit_secs: f64, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < limit_secs;
    let pass = out.pass && in_time;
    let time_note = if in_time { String::new() } else { format!(", over the {limit_secs:.0} s budget") };
    println!(
        "criterion {n} {}: {title}: {} ({secs:.1} s{time_note})",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn suite(names: &[&str]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let r = run_suite(name, 0).expect("known suite");
        pass &= r.passed();
        let mut part = format!("{} {}/{} cases ok", r.name, r.cases - r.failures.len(), r.cases);
        if !r.note.is_empty() {
            part += &format!(" [{}]", r.note);
        }
        if let Some(f) = r.failures.first() {
            part += &format!(" first failure seed {}: {}", f.seed, f.detail);
        }
        parts.push(part);
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn split_instances(cfg: &GenConfig, split: Split, count: usize, sensor: SensorConfig) -> Vec<Instance> {
    let data = generate(cfg, count, split.seed(SEED), split).expect("generate");
    instances(&data, sensor).expect("instances")
}

/// Train, validation and test sets for one preset.
fn preset(cfg: &GenConfig, sensor: SensorConfig) -> [Vec<Instance>; 3] {
    [
        split_instances(cfg, Split::Train, 100, sensor),
        split_instances(cfg, Split::Validation, 20, sensor),
        split_instances(cfg, Split::Test, 100, sensor),
    ]
}

fn eval_all(policies: &[&dyn Policy], test: &[Instance], spec: &ProblemSpec) -> Vec<(EvalSummary, Vec<Trajectory>)> {
    policies
        .iter()
        .map(|p| evaluate(*p, test, spec, EVAL_SEED).expect("evaluate"))
        .collect()
}

fn margin(a: &EvalSummary, b: &EvalSummary) -> (f64, f64) {
    (a.final_mean - b.final_mean, a.final_ci_half.max(b.final_ci_half))
}

fn held_out_comparison() -> Outcome {
    let sensor = SensorConfig { max_range: RANGE, ..SensorConfig::default() };
    let spec = ProblemSpec::unconstrained(30);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rear_wins) in [("parallel-lines", true), ("distributed-blocks", false)] {
        let cfg = GenConfig::new((64, 64), Generator::by_name(name).unwrap()).with_nodes(300);
        let [tr, va, te] = preset(&cfg, sensor);
        let tc = TrainConfig { algorithm: Algorithm::RewardAgg, iterations: 10, episodes: 100, spec, sensor, seed: SEED, ..TrainConfig::default() };
        let learnt = train(&tc, &tr, &va).expect("train").policy;
        let ae = HeuristicPolicy::new(Metric::AverageEntropy, 0.0).unwrap();
        let rs = HeuristicPolicy::new(Metric::RearSideVoxel, 0.0).unwrap();
        let res = eval_all(&[&learnt, &ae, &rs], &te, &spec);
        let (l, a, r) = (&res[0].0, &res[1].0, &res[2].0);
        let (d_la, c_la) = margin(l, a);
        let (d_lr, c_lr) = margin(l, r);
        let (d_flip, c_flip) = if rear_wins { margin(r, a) } else { margin(a, r) };
        let ok = d_la >= c_la && d_lr >= c_lr && d_flip >= c_flip;
        pass &= ok;
        parts.push(format!(
            "{name}: learnt {:.3}±{:.3}, average-entropy {:.3}±{:.3}, rear-side-voxel {:.3}±{:.3}, expected {} first",
            l.final_mean,
            l.final_ci_half,
            a.final_mean,
            a.final_ci_half,
            r.final_mean,
            r.final_ci_half,
            if rear_wins { "rear-side-voxel" } else { "average-entropy" },
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn budgeted() -> Outcome {
    const BUDGET: f64 = 12.0;
    let sensor = SensorConfig { max_range: RANGE, ..SensorConfig::default() };
    let spec = ProblemSpec::budgeted(10, BUDGET);
    let cfg = GenConfig::new((32, 32), Generator::by_name("distributed-blocks").unwrap()).with_nodes(50);
    let [tr, va, te] = preset(&cfg, sensor);
    let tc = TrainConfig { algorithm: Algorithm::QvalAgg, iterations: 10, episodes: 100, spec, sensor, seed: SEED, ..TrainConfig::default() };
    let out = train(&tc, &tr, &va).expect("train");
    let label_violations = out
        .labels
        .iter()
        .filter(|l| {
            let mut path = l.path.clone();
            path.push(l.action);
            travel_cost(&path, tr[l.world].nodes()).unwrap() > BUDGET
        })
        .count();

    let heuristics: Vec<HeuristicPolicy> =
        Metric::ALL.iter().map(|&m| HeuristicPolicy::new(m, DEFAULT_MOTION_PENALTY).unwrap()).collect();
    let oracle = OraclePolicy(OracleKind::Gcb);
    let mut policies: Vec<&dyn Policy> = vec![&out.policy, &oracle];
    policies.extend(heuristics.iter().map(|h| h as &dyn Policy));
    let res = eval_all(&policies, &te, &spec);
    let over: usize = res
        .iter()
        .flat_map(|(_, ts)| ts)
        .filter(|t| t.cost > BUDGET || travel_cost(&t.nodes(), te[t.world].nodes()).unwrap() > BUDGET)
        .count();
    let learnt = &res[0].0;
    let best = res[2..]
        .iter()
        .map(|(s, _)| s)
        .max_by(|a, b| a.final_mean.total_cmp(&b.final_mean))
        .unwrap();
    let (diff, ci) = margin(learnt, best);
    let pass = over == 0 && label_violations == 0 && diff >= -ci;
    Outcome {
        pass,
        detail: format!(
            "{} training labels and {} evaluation trajectories, {} over budget; qval-agg {:.3}±{:.3} vs best {} {:.3}±{:.3}",
            out.labels.len(),
            res.iter().map(|r| r.1.len()).sum::<usize>(),
            over + label_violations,
            learnt.final_mean,
            learnt.final_ci_half,
            best.policy,
            best.final_mean,
            best.final_ci_half
        ),
    }
}

/// worldgen → files → train → model file → eval → CSV files.
fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = GenConfig::new((48, 48), Generator::by_name("distributed-blocks").unwrap()).with_nodes(60);
    let sensor = SensorConfig { max_range: RANGE, ..SensorConfig::default() };
    let spec = ProblemSpec::unconstrained(10);
    let mut sets = Vec::new();
    for (split, count) in [(Split::Train, 12), (Split::Validation, 4), (Split::Test, 12)] {
        let path = dir.join(format!("{}.igwd", split.as_str()));
        save_dataset(&generate(&cfg, count, split.seed(7), split).unwrap(), &path, CellEncoding::Packed).unwrap();
        sets.push(instances(&load_dataset(&path).unwrap(), sensor).unwrap());
    }
    let tc = TrainConfig { iterations: 3, episodes: 12, spec, sensor, seed: 7, ..TrainConfig::default() };
    let out = train(&tc, &sets[0], &sets[1]).unwrap();
    save_policy(&out.policy, &dir.join("model.json")).unwrap();
    out.report.write(&dir.join("report.csv"), &dir.join("report.txt")).unwrap();
    let model = load_policy(&dir.join("model.json")).unwrap();
    let rs = HeuristicPolicy::new(Metric::RearSideVoxel, 0.0).unwrap();
    let mut summaries = Vec::new();
    for (i, p) in [&model as &dyn Policy, &rs].into_iter().enumerate() {
        let (s, _) = evaluate(p, &sets[2], &spec, EVAL_SEED).unwrap();
        write_curve(&dir.join(format!("curve{i}.csv")), &s).unwrap();
        summaries.push(s);
    }
    write_final(&dir.join("final.csv"), &summaries).unwrap();
    ["train.igwd", "test.igwd", "model.json", "report.csv", "curve0.csv", "curve1.csv", "final.csv"]
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (x, y) = (pipeline(a.path()), pipeline(b.path()));
    let differing: Vec<&str> = x.iter().zip(&y).filter(|(p, q)| p.1 != q.1).map(|(p, _)| p.0.as_str()).collect();
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} files byte-identical across two runs", x.len())
        } else {
            format!("differing files: {differing:?}")
        },
    }
}

fn memorization() -> Outcome {
    // real feature rows from a short training run
    let sensor = SensorConfig { max_range: RANGE, ..SensorConfig::default() };
    let cfg = GenConfig::new((48, 48), Generator::by_name("poisson-forest").unwrap()).with_nodes(80);
    let tr = split_instances(&cfg, Split::Train, 20, sensor);
    let va = split_instances(&cfg, Split::Validation, 4, sensor);
    let tc = TrainConfig { iterations: 2, episodes: 20, spec: ProblemSpec::unconstrained(15), sensor, ..TrainConfig::default() };
    let out = train(&tc, &tr, &va).unwrap();
    let mut seen = HashSet::new();
    let mut data = RegressionDataset::default();
    for e in &out.dataset.examples {
        if seen.insert(e.features.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
            data.examples.push(*e);
        }
    }
    let model = fit(&data, &ForestConfig::memorize(10), 5, None).unwrap();
    let mse = model.mse(&data);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let policy = LearntPolicy::stationary("memorized", tc.features(), model.clone());
    save_policy(&policy, &path).unwrap();
    let back = load_policy(&path).unwrap();
    let loaded = back.model_at(1);
    let mismatched = data
        .examples
        .iter()
        .filter(|e| model.predict(&e.features).to_bits() != loaded.predict(&e.features).to_bits())
        .count();
    Outcome {
        pass: mse == 0.0 && mismatched == 0 && back == policy,
        detail: format!(
            "{} distinct rows, training MSE {mse:e}, {mismatched} predictions changed by save/load",
            data.examples.len()
        ),
    }
}

fn main() {
    // `cargo test -- <filter>` style arguments are ignored; the suite is fixed
    let results = [
        report(1, "submodularity and monotonicity", 30.0, || suite(&["submodularity"])),
        report(2, "roll-in identity", 60.0, || suite(&["rollin"])),
        report(3, "hallucination near-optimality", 120.0, || suite(&["hallucination", "greedy"])),
        report(4, "learnt beats heuristics on both datasets", 1200.0, held_out_comparison),
        report(5, "budgeted feasibility", 900.0, budgeted),
        report(6, "determinism", 600.0, determinism),
        report(7, "sensor exactness", 10.0, || suite(&["sensor"])),
        report(8, "learner memorization", 30.0, memorization),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
