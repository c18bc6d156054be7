//! Policy rollouts and cumulative-reward statistics.
//!
//! A trajectory's cumulative reward at timestep `t` is the coverage after `t`
//! actions, i.e. the start node's coverage plus the rewards of the first `t`
//! actions. Episodes that end early hold their last value for the remaining
//! timesteps when curves are averaged. Confidence half-widths use the normal
//! approximation `1.96 · s / √n` with `s` the sample standard deviation
//! (`n − 1` denominator); with `n = 1` the half-width is 0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Episode, Policy};
use crate::rng;
use crate::sensor::SensorConfig;
use crate::utility::{Instance, ProblemSpec};
use crate::worldgen::{NodeId, WorldDataset};

/// Version of the CSV and JSONL report layouts written by this module and by
/// training reports.
pub const REPORT_FORMAT_VERSION: &str = "1.0";

/// Binds every world of a dataset to the sensor, caching node views.
pub fn instances(dataset: &WorldDataset, sensor: SensorConfig) -> Result<Vec<Instance>> {
    dataset
        .entries
        .par_iter()
        .map(|e| Instance::new(e.world.clone(), e.nodes.clone(), sensor))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based timestep.
    pub t: usize,
    pub node: NodeId,
    pub reward: f64,
    pub cumulative: f64,
    /// `None` for unconstrained problems.
    pub remaining_budget: Option<f64>,
    /// Size of the feasible set the action was chosen from.
    pub feasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    Horizon,
    BudgetExhausted,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub policy: String,
    pub world: usize,
    pub start_node: NodeId,
    pub start_coverage: f64,
    pub steps: Vec<StepRecord>,
    pub cost: f64,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn final_reward(&self) -> f64 {
        self.steps.last().map_or(self.start_coverage, |s| s.cumulative)
    }

    /// Cumulative reward after `t` actions, held constant past the end.
    pub fn cumulative_at(&self, t: usize) -> f64 {
        if t == 0 {
            return self.start_coverage;
        }
        self.steps
            .get(t - 1)
            .or(self.steps.last())
            .map_or(self.start_coverage, |s| s.cumulative)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        std::iter::once(self.start_node)
            .chain(self.steps.iter().map(|s| s.node))
            .collect()
    }
}

/// Runs `policy` for up to `spec.horizon` actions. Stochastic policies draw
/// from the stream seeded by `seed`.
pub fn rollout(
    policy: &dyn Policy,
    inst: &Instance,
    spec: &ProblemSpec,
    seed: u64,
    world: usize,
) -> Result<Trajectory> {
    let mut rng = rng::root(seed);
    let mut ep = Episode::new(inst, *spec)?;
    let mut traj = Trajectory {
        policy: policy.name(),
        world,
        start_node: inst.nodes().start_id(),
        start_coverage: ep.coverage(),
        steps: Vec::with_capacity(spec.horizon),
        cost: 0.0,
        terminal: Terminal::Horizon,
    };
    while ep.t() < spec.horizon {
        let feasible = ep.feasible();
        if feasible.is_empty() {
            traj.terminal = Terminal::BudgetExhausted;
            break;
        }
        let action = match policy.act(&ep, &feasible, &mut rng) {
            Ok(a) if feasible.binary_search(&a).is_ok() => a,
            Ok(a) => {
                traj.terminal = Terminal::Aborted(format!("policy chose infeasible node {a}"));
                break;
            }
            Err(e) => {
                traj.terminal = Terminal::Aborted(e.to_string());
                break;
            }
        };
        let reward = ep.step(action)?;
        traj.steps.push(StepRecord {
            t: ep.t(),
            node: action,
            reward,
            cumulative: ep.coverage(),
            remaining_budget: ep.state().remaining_budget(spec),
            feasible: feasible.len(),
        });
    }
    traj.cost = ep.state().cost();
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub n: usize,
    /// Mean cumulative reward at timesteps `0..=T`.
    pub mean: Vec<f64>,
    pub ci_half: Vec<f64>,
    pub final_mean: f64,
    pub final_ci_half: f64,
    pub final_median: f64,
    pub wall_clock_secs: f64,
}

/// Sample mean and 95% normal-approximation half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Aggregates trajectories (ordered by world) into a summary.
pub fn summarize(policy: &str, trajs: &[Trajectory], horizon: usize, wall_clock_secs: f64) -> EvalSummary {
    let (mut mean, mut ci_half) = (Vec::new(), Vec::new());
    for t in 0..=horizon {
        let vals: Vec<f64> = trajs.iter().map(|tr| tr.cumulative_at(t)).collect();
        let (m, c) = mean_ci(&vals);
        mean.push(m);
        ci_half.push(c);
    }
    let finals: Vec<f64> = trajs.iter().map(|tr| tr.cumulative_at(horizon)).collect();
    EvalSummary {
        policy: policy.to_string(),
        n: trajs.len(),
        final_mean: *mean.last().unwrap_or(&0.0),
        final_ci_half: *ci_half.last().unwrap_or(&0.0),
        final_median: median(&finals),
        mean,
        ci_half,
        wall_clock_secs,
    }
}

/// Rolls `policy` out once per instance. World `i` uses rollout seed
/// `derive_seed(seed, [i])`, so different policies evaluated with the same
/// seed face identical worlds and random streams.
pub fn evaluate(
    policy: &dyn Policy,
    instances: &[Instance],
    spec: &ProblemSpec,
    seed: u64,
) -> Result<(EvalSummary, Vec<Trajectory>)> {
    if instances.is_empty() {
        return Err(Error::InvalidConfig("no worlds to evaluate on".into()));
    }
    let clock = Instant::now();
    let trajs = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| rollout(policy, inst, spec, rng::derive_seed(seed, &[i as u64]), i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&policy.name(), &trajs, spec.horizon, clock.elapsed().as_secs_f64());
    Ok((summary, trajs))
}

/// `timestep,mean,ci_half,n`
pub fn write_curve(path: &Path, s: &EvalSummary) -> Result<()> {
    let mut out = String::from("timestep,mean,ci_half,n\n");
    for (t, (m, c)) in s.mean.iter().zip(&s.ci_half).enumerate() {
        writeln!(out, "{t},{m},{c},{}", s.n).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// `policy,median,lo,hi` where `lo`/`hi` are the final mean ± CI half-width.
pub fn write_final(path: &Path, summaries: &[EvalSummary]) -> Result<()> {
    let mut out = String::from("policy,median,lo,hi\n");
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{}",
            s.policy,
            s.final_median,
            s.final_mean - s.final_ci_half,
            s.final_mean + s.final_ci_half
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// One JSON object per line.
pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut out = Vec::new();
    for t in trajs {
        serde_json::to_writer(&mut out, t)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_a_single_value_is_zero() {
        assert_eq!(mean_ci(&[0.4]), (0.4, 0.0));
    }

    #[test]
    fn ci_matches_the_normal_formula() {
        let (m, c) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let s = (5.0f64 / 3.0).sqrt();
        assert!((c - 1.96 * s / 2.0).abs() < 1e-15);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn early_termination_holds_the_last_value() {
        let tr = Trajectory {
            policy: "p".into(),
            world: 0,
            start_node: 0,
            start_coverage: 0.1,
            steps: vec![StepRecord {
                t: 1,
                node: 3,
                reward: 0.2,
                cumulative: 0.3,
                remaining_budget: Some(1.0),
                feasible: 4,
            }],
            cost: 2.0,
            terminal: Terminal::BudgetExhausted,
        };
        assert_eq!(tr.cumulative_at(0), 0.1);
        assert_eq!(tr.cumulative_at(1), 0.3);
        assert_eq!(tr.cumulative_at(5), 0.3);
        let s = summarize("p", &[tr], 3, 0.0);
        assert_eq!(s.mean, vec![0.1, 0.3, 0.3, 0.3]);
        assert_eq!(s.ci_half, vec![0.0; 4]);
    }
}
