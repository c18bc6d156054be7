//! Imitation of clairvoyant oracles.
//!
//! Two procedures, each with two kinds of target:
//!
//! | algorithm    | policy         | target                         | problem        |
//! |--------------|----------------|--------------------------------|----------------|
//! | `reward-ft`  | non-stationary | one-step reward                | unconstrained  |
//! | `qval-ft`    | non-stationary | oracle reward-to-go            | budgeted       |
//! | `reward-agg` | stationary     | one-step reward                | unconstrained  |
//! | `qval-agg`   | stationary     | oracle reward-to-go            | budgeted       |
//!
//! Forward training fits one model per timestep on states reached by the
//! models already trained. Aggregation rolls in a per-step Bernoulli mixture
//! of the oracle and the current learner, labels random actions at a random
//! timestep, aggregates all data and refits; the iterate with the best
//! validation reward is returned.
//!
//! Each roll-in episode draws from its own child stream, and examples are
//! gathered in episode order, so results do not depend on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{FeatureConfig, FeatureScaler, FeatureSchema, Visibility};
use crate::error::{Error, Result};
use crate::eval;
use crate::learner::{fit, ForestConfig, ForestModel, LearntPolicy, RegressionDataset, RegressionExample};
use crate::oracles::{oracle_act, q_value_to_go, OracleKind};
use crate::policy::{Episode, Policy, RandomPolicy};
use crate::rng::{self, Rng};
use crate::sensor::SensorConfig;
use crate::utility::{Instance, ProblemSpec, Variant};
use crate::worldgen::NodeId;

/// Roll-in attempts per episode before it is given up.
const MAX_RESAMPLES: usize = 32;

// stream tags
const FT_COLLECT: u64 = 1;
const FT_FIT: u64 = 2;
const AGG_COLLECT: u64 = 3;
const AGG_FIT: u64 = 4;
const VALIDATE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    RewardFt,
    QvalFt,
    RewardAgg,
    QvalAgg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::RewardFt, Self::QvalFt, Self::RewardAgg, Self::QvalAgg];

    pub fn name(self) -> &'static str {
        match self {
            Self::RewardFt => "reward-ft",
            Self::QvalFt => "qval-ft",
            Self::RewardAgg => "reward-agg",
            Self::QvalAgg => "qval-agg",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_forward(self) -> bool {
        matches!(self, Self::RewardFt | Self::QvalFt)
    }

    pub fn uses_value_to_go(self) -> bool {
        matches!(self, Self::QvalFt | Self::QvalAgg)
    }

    /// The problem variant each algorithm is paired with.
    pub fn variant(self) -> Variant {
        if self.uses_value_to_go() {
            Variant::Con
        } else {
            Variant::Unc
        }
    }
}

/// Oracle weight `α_i` of the roll-in mixture at iteration `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MixSchedule {
    /// `α_1 = 1`, `α_i = 0` afterwards.
    FirstOracle,
    /// `α_i = p^(i-1)`.
    Exponential { p: f64 },
    /// The same `α` at every iteration.
    Constant { alpha: f64 },
}

impl MixSchedule {
    /// `i` is 1-based.
    pub fn alpha(&self, i: usize) -> f64 {
        match *self {
            MixSchedule::FirstOracle => {
                if i <= 1 {
                    1.0
                } else {
                    0.0
                }
            }
            MixSchedule::Exponential { p } => p.powi(i as i32 - 1),
            MixSchedule::Constant { alpha } => alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MixSchedule::FirstOracle => true,
            MixSchedule::Exponential { p } => (0.0..=1.0).contains(&p),
            MixSchedule::Constant { alpha } => (0.0..=1.0).contains(&alpha),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("mixing weights must lie in [0, 1]".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Aggregation iterations `N`. Forward training runs one per timestep.
    pub iterations: usize,
    /// Roll-in episodes per iteration (per timestep for forward training).
    pub episodes: usize,
    pub mixing: MixSchedule,
    pub spec: ProblemSpec,
    pub sensor: SensorConfig,
    pub visibility: Visibility,
    pub forest: ForestConfig,
    pub seed: u64,
    /// Random feasible actions labelled at each roll-in state. 1 labels a
    /// single explored action per roll-in.
    pub actions_per_state: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::RewardAgg,
            iterations: 10,
            episodes: 100,
            mixing: MixSchedule::FirstOracle,
            spec: ProblemSpec::unconstrained(30),
            sensor: SensorConfig::default(),
            visibility: Visibility::Optimistic,
            forest: ForestConfig::default(),
            seed: 0,
            actions_per_state: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.sensor.validate()?;
        self.mixing.validate()?;
        if self.iterations == 0 || self.episodes == 0 || self.actions_per_state == 0 {
            return Err(Error::InvalidConfig(
                "iterations, episodes and actions_per_state must be at least 1".into(),
            ));
        }
        if self.algorithm.variant() != self.spec.variant() {
            return Err(Error::ConfigMismatch(match self.algorithm.variant() {
                Variant::Con => format!("{} imitates the budgeted oracle and needs a budget", self.algorithm.name()),
                Variant::Unc => format!("{} is for unconstrained problems; drop the budget", self.algorithm.name()),
            }));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            sensor: self.sensor,
            visibility: self.visibility,
        }
    }

    pub fn oracle(&self) -> OracleKind {
        OracleKind::for_spec(&self.spec)
    }
}

/// Where a training example came from, kept for label audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub world: usize,
    /// Visited nodes at labelling time, start node first.
    pub path: Vec<NodeId>,
    pub action: NodeId,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration (timestep for forward training).
    pub index: usize,
    pub new_examples: usize,
    pub dataset_size: usize,
    pub train_mse: f64,
    pub validation_reward: f64,
    /// Mean over labelled states of the best labelled target minus the
    /// target of the action the roll-in learner would have picked among
    /// them (the uniform expectation for a random learner).
    pub online_loss: f64,
    pub resampled: usize,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    /// 1-based index of the returned iterate.
    pub selected: usize,
    pub wall_clock_secs: f64,
}

impl TrainingReport {
    /// `iteration,new_examples,dataset_size,train_mse,validation_reward,online_loss,resampled`
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,new_examples,dataset_size,train_mse,validation_reward,online_loss,resampled\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.index, r.new_examples, r.dataset_size, r.train_mse, r.validation_reward, r.online_loss, r.resampled
            )
            .expect("string write");
        }
        out
    }

    /// Human-readable summary including timings.
    pub fn to_text(&self) -> String {
        let mut out = format!("algorithm: {}\n", self.algorithm.name());
        writeln!(
            out,
            "{:>5} {:>7} {:>8} {:>11} {:>11} {:>11} {:>6} {:>8}",
            "iter", "new", "size", "train_mse", "val_reward", "online_loss", "resamp", "secs"
        )
        .expect("string write");
        for r in &self.records {
            writeln!(
                out,
                "{:>5} {:>7} {:>8} {:>11.6} {:>11.6} {:>11.6} {:>6} {:>8.2}",
                r.index,
                r.new_examples,
                r.dataset_size,
                r.train_mse,
                r.validation_reward,
                r.online_loss,
                r.resampled,
                r.wall_clock_secs
            )
            .expect("string write");
        }
        writeln!(out, "selected: {}", self.selected).expect("string write");
        writeln!(out, "wall_clock_secs: {:.2}", self.wall_clock_secs).expect("string write");
        out
    }

    pub fn write(&self, csv_path: &Path, text_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv())?;
        fs::write(text_path, self.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: LearntPolicy,
    pub report: TrainingReport,
    /// Every example collected, in collection order.
    pub dataset: RegressionDataset,
    /// Provenance of `dataset.examples`, index-aligned.
    pub labels: Vec<Label>,
}

/// Runs the algorithm named in `config`.
pub fn train(config: &TrainConfig, train_worlds: &[Instance], val_worlds: &[Instance]) -> Result<TrainOutput> {
    if config.algorithm.is_forward() {
        train_forward(config, train_worlds, val_worlds)
    } else {
        train_aggregate(config, train_worlds, val_worlds)
    }
}

/// The oracle target of `action` from `ep`'s current state.
pub fn label_target(config: &TrainConfig, ep: &Episode<'_>, action: NodeId) -> Result<f64> {
    if config.algorithm.uses_value_to_go() {
        let remaining = config.spec.horizon - ep.t();
        q_value_to_go(config.oracle(), ep.instance(), ep.state(), action, remaining, &config.spec)
    } else {
        Ok(ep.reward_of(action))
    }
}

/// Recomputes a stored label from scratch on its world.
pub fn audit_label(config: &TrainConfig, inst: &Instance, label: &Label) -> Result<f64> {
    let mut ep = Episode::new(inst, config.spec)?;
    if label.path.first() != Some(&inst.nodes().start_id()) {
        return Err(Error::InvalidConfig("label path must begin at the start node".into()));
    }
    for &v in &label.path[1..] {
        ep.step(v)?;
    }
    label_target(config, &ep, label.action)
}

/// How roll-in actions are chosen.
enum RollIn<'p> {
    /// Per-step Bernoulli(α) choice of the oracle over `learner`.
    Mixture { alpha: f64, learner: &'p dyn Policy },
    /// The learnt model for each timestep (forward training).
    Forward(&'p [ForestModel]),
}

/// Labelled actions at one roll-in state.
struct Collected {
    examples: Vec<RegressionExample>,
    labels: Vec<Label>,
    /// Index into `examples` the roll-in learner ranks first, if it is
    /// deterministic.
    learner_pick: Option<usize>,
}

struct EpisodeOutcome {
    state: Option<Collected>,
    resampled: usize,
}

fn collect_episode(
    config: &TrainConfig,
    worlds: &[Instance],
    fixed_t: Option<usize>,
    roll_in: &RollIn<'_>,
    learner_model: Option<&ForestModel>,
    rng: &mut Rng,
) -> Result<EpisodeOutcome> {
    let features = config.features();
    let horizon = config.spec.horizon;
    let mut resampled = 0;
    for _ in 0..MAX_RESAMPLES {
        let world = rng.random_range(0..worlds.len());
        let t = fixed_t.unwrap_or_else(|| rng.random_range(1..=horizon));
        let mut ep = Episode::new(&worlds[world], config.spec)?;
        let mut alive = true;
        while ep.t() + 1 < t {
            let feasible = ep.feasible();
            if feasible.is_empty() {
                alive = false;
                break;
            }
            let a = match roll_in {
                RollIn::Mixture { alpha, learner } => {
                    if rng.random_bool(*alpha) {
                        oracle_act(config.oracle(), ep.instance(), ep.state(), &config.spec)?
                    } else {
                        learner.act(&ep, &feasible, rng)?
                    }
                }
                RollIn::Forward(models) => {
                    let p = ForwardPrefix { models, features };
                    p.act(&ep, &feasible, rng)?
                }
            };
            ep.step(a)?;
        }
        let mut feasible = if alive { ep.feasible() } else { Vec::new() };
        if feasible.is_empty() {
            resampled += 1;
            continue;
        }
        feasible.shuffle(rng);
        feasible.truncate(config.actions_per_state);
        feasible.sort_unstable();
        let mut examples = Vec::with_capacity(feasible.len());
        let mut labels = Vec::with_capacity(feasible.len());
        for &a in &feasible {
            let target = label_target(config, &ep, a)?;
            examples.push(RegressionExample::new(ep.features(a, &features)?, target, t));
            labels.push(Label {
                world,
                path: ep.state().visited().to_vec(),
                action: a,
                target,
            });
        }
        let learner_pick = learner_model.and_then(|m| {
            crate::policy::argmax_first(examples.iter().map(|e| m.predict(&e.features)))
        });
        return Ok(EpisodeOutcome {
            state: Some(Collected {
                examples,
                labels,
                learner_pick,
            }),
            resampled,
        });
    }
    Ok(EpisodeOutcome { state: None, resampled })
}

/// Forward-training prefix policy: model `t` acts at timestep `t`.
struct ForwardPrefix<'m> {
    models: &'m [ForestModel],
    features: FeatureConfig,
}

impl Policy for ForwardPrefix<'_> {
    fn name(&self) -> String {
        "forward-prefix".into()
    }

    fn act(&self, ep: &Episode<'_>, feasible: &[NodeId], _: &mut Rng) -> Result<NodeId> {
        let model = &self.models[ep.t().min(self.models.len() - 1)];
        let scores = feasible
            .iter()
            .map(|&a| Ok(model.predict(&ep.features(a, &self.features)?)))
            .collect::<Result<Vec<f64>>>()?;
        crate::policy::argmax_first(scores)
            .map(|i| feasible[i])
            .ok_or(Error::NoFeasibleAction)
    }
}

/// Examples, labels, online loss and resample count of one batch of episodes.
struct Batch {
    data: RegressionDataset,
    labels: Vec<Label>,
    online_loss: f64,
    resampled: usize,
}

fn run_batch(
    config: &TrainConfig,
    worlds: &[Instance],
    fixed_t: Option<usize>,
    roll_in: &RollIn<'_>,
    learner_model: Option<&ForestModel>,
    stream: &[u64],
) -> Result<Batch> {
    let outcomes = (0..config.episodes)
        .into_par_iter()
        .map(|e| {
            let mut path = stream.to_vec();
            path.push(e as u64);
            let mut rng = rng::child(config.seed, &path);
            collect_episode(config, worlds, fixed_t, roll_in, learner_model, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = Batch {
        data: RegressionDataset::default(),
        labels: Vec::new(),
        online_loss: 0.0,
        resampled: 0,
    };
    let mut states = 0usize;
    for o in outcomes {
        batch.resampled += o.resampled;
        let Some(c) = o.state else { continue };
        let best = c.examples.iter().map(|e| e.target).fold(f64::NEG_INFINITY, f64::max);
        let picked = match c.learner_pick {
            Some(i) => c.examples[i].target,
            None => c.examples.iter().map(|e| e.target).sum::<f64>() / c.examples.len() as f64,
        };
        batch.online_loss += best - picked;
        states += 1;
        batch.data.examples.extend(c.examples);
        batch.labels.extend(c.labels);
    }
    if states > 0 {
        batch.online_loss /= states as f64;
    }
    Ok(batch)
}

fn check_worlds(train_worlds: &[Instance], val_worlds: &[Instance]) -> Result<()> {
    if train_worlds.is_empty() || val_worlds.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one train and one validation world".into()));
    }
    Ok(())
}

fn validation_reward(policy: &dyn Policy, config: &TrainConfig, val_worlds: &[Instance], i: usize) -> Result<f64> {
    let seed = rng::derive_seed(config.seed, &[VALIDATE, i as u64]);
    Ok(eval::evaluate(policy, val_worlds, &config.spec, seed)?.0.final_mean)
}

/// Forward training: one model per timestep, each fitted only on states
/// reached by the models before it. Returns the best validation prefix,
/// padded with its last model to `T` models.
pub fn train_forward(config: &TrainConfig, train_worlds: &[Instance], val_worlds: &[Instance]) -> Result<TrainOutput> {
    config.validate()?;
    if !config.algorithm.is_forward() {
        return Err(Error::ConfigMismatch(format!(
            "{} is not a forward-training algorithm",
            config.algorithm.name()
        )));
    }
    check_worlds(train_worlds, val_worlds)?;
    let clock = Instant::now();
    let horizon = config.spec.horizon;
    let features = config.features();
    let mut models: Vec<ForestModel> = Vec::with_capacity(horizon);
    let mut scaler: Option<FeatureScaler> = None;
    let mut dataset = RegressionDataset::default();
    let mut labels = Vec::new();
    let mut records = Vec::with_capacity(horizon);

    for t in 1..=horizon {
        let iter_clock = Instant::now();
        let batch = run_batch(
            config,
            train_worlds,
            Some(t),
            &RollIn::Forward(&models),
            None,
            &[FT_COLLECT, t as u64],
        )?;
        let model = if batch.data.len() >= config.forest.min_samples_leaf && !batch.data.is_empty() {
            let s = match &scaler {
                Some(s) => s.clone(),
                None => {
                    let s = FeatureScaler::fit(batch.data.examples.iter().map(|e| e.features.as_slice()))?;
                    scaler = Some(s.clone());
                    s
                }
            };
            fit(&batch.data, &config.forest, rng::derive_seed(config.seed, &[FT_FIT, t as u64]), Some(s))?
        } else {
            // nothing reached this timestep: reuse the previous model
            models.last().cloned().ok_or(Error::EmptyDataset)?
        };
        let train_mse = model.mse(&batch.data);
        models.push(model);
        let prefix = LearntPolicy::non_stationary(config.algorithm.name(), features, models.clone());
        let validation_reward = validation_reward(&prefix, config, val_worlds, t)?;
        records.push(IterationRecord {
            index: t,
            new_examples: batch.data.len(),
            dataset_size: batch.data.len(),
            train_mse,
            validation_reward,
            online_loss: batch.online_loss,
            resampled: batch.resampled,
            wall_clock_secs: iter_clock.elapsed().as_secs_f64(),
        });
        dataset.extend(&batch.data)?;
        labels.extend(batch.labels);
    }

    let selected = select_best(&records);
    let mut chosen = models[..selected].to_vec();
    let last = chosen.last().cloned().expect("at least one model");
    chosen.resize(horizon, last);
    Ok(TrainOutput {
        policy: LearntPolicy::non_stationary(config.algorithm.name(), features, chosen),
        report: TrainingReport {
            algorithm: config.algorithm,
            records,
            selected,
            wall_clock_secs: clock.elapsed().as_secs_f64(),
        },
        dataset,
        labels,
    })
}

/// First record with the highest validation reward (1-based).
fn select_best(records: &[IterationRecord]) -> usize {
    crate::policy::argmax_first(records.iter().map(|r| r.validation_reward))
        .map_or(1, |i| records[i].index)
}

/// Dataset aggregation with a stationary learner. `π̂_1` is the uniform
/// random policy; iteration `i` rolls in the mixture of the oracle and
/// `π̂_i`, aggregates, and fits `π̂_{i+1}`. The fitted iterate with the best
/// validation reward is returned; record `i` describes `π̂_{i+1}`.
pub fn train_aggregate(config: &TrainConfig, train_worlds: &[Instance], val_worlds: &[Instance]) -> Result<TrainOutput> {
    config.validate()?;
    if config.algorithm.is_forward() {
        return Err(Error::ConfigMismatch(format!(
            "{} is not an aggregation algorithm",
            config.algorithm.name()
        )));
    }
    check_worlds(train_worlds, val_worlds)?;
    let clock = Instant::now();
    let features = config.features();
    let mut dataset = RegressionDataset {
        schema: FeatureSchema::current(),
        examples: Vec::new(),
    };
    let mut labels = Vec::new();
    let mut scaler: Option<FeatureScaler> = None;
    let mut current: Option<LearntPolicy> = None;
    let mut fitted: Vec<LearntPolicy> = Vec::with_capacity(config.iterations);
    let mut records = Vec::with_capacity(config.iterations);

    for i in 1..=config.iterations {
        let iter_clock = Instant::now();
        let learner: &dyn Policy = match &current {
            Some(p) => p,
            None => &RandomPolicy,
        };
        let learner_model = current.as_ref().map(|p| p.model_at(1));
        let batch = run_batch(
            config,
            train_worlds,
            None,
            &RollIn::Mixture {
                alpha: config.mixing.alpha(i),
                learner,
            },
            learner_model,
            &[AGG_COLLECT, i as u64],
        )?;
        dataset.extend(&batch.data)?;
        labels.extend(batch.labels);
        if scaler.is_none() && !dataset.is_empty() {
            scaler = Some(FeatureScaler::fit(dataset.examples.iter().map(|e| e.features.as_slice()))?);
        }
        let model = fit(
            &dataset,
            &config.forest,
            rng::derive_seed(config.seed, &[AGG_FIT, i as u64]),
            scaler.clone(),
        )?;
        let train_mse = model.mse(&dataset);
        let policy = LearntPolicy::stationary(config.algorithm.name(), features, model);
        let validation_reward = validation_reward(&policy, config, val_worlds, i)?;
        records.push(IterationRecord {
            index: i,
            new_examples: batch.data.len(),
            dataset_size: dataset.len(),
            train_mse,
            validation_reward,
            online_loss: batch.online_loss,
            resampled: batch.resampled,
            wall_clock_secs: iter_clock.elapsed().as_secs_f64(),
        });
        fitted.push(policy.clone());
        current = Some(policy);
    }

    let selected = select_best(&records);
    Ok(TrainOutput {
        policy: fitted.swap_remove(selected - 1),
        report: TrainingReport {
            algorithm: config.algorithm,
            records,
            selected,
            wall_clock_secs: clock.elapsed().as_secs_f64(),
        },
        dataset,
        labels,
    })
}

/// Oracle-only roll-ins, as used by aggregation with `α = 1`: the visited
/// paths reached after `t - 1` steps on each world.
pub fn oracle_rollin_paths(inst: &Instance, spec: &ProblemSpec, t: usize) -> Result<Vec<NodeId>> {
    let mut ep = Episode::new(inst, *spec)?;
    while ep.t() + 1 < t {
        if ep.feasible().is_empty() {
            break;
        }
        let a = oracle_act(OracleKind::for_spec(spec), inst, ep.state(), spec)?;
        ep.step(a)?;
    }
    Ok(ep.state().visited().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::gen_parallel_lines;

    fn small_config(algorithm: Algorithm) -> TrainConfig {
        let spec = match algorithm.variant() {
            Variant::Unc => ProblemSpec::unconstrained(4),
            Variant::Con => ProblemSpec::budgeted(4, 12.0),
        };
        TrainConfig {
            algorithm,
            iterations: 3,
            episodes: 6,
            spec,
            sensor: SensorConfig { num_rays: 32, ..SensorConfig::default() },
            forest: ForestConfig { num_trees: 5, min_samples_leaf: 2, ..ForestConfig::default() },
            seed: 11,
            actions_per_state: 3,
            ..TrainConfig::default()
        }
    }

    fn worlds(sensor: SensorConfig) -> (Vec<Instance>, Vec<Instance>) {
        let mut d = gen_parallel_lines((48, 48), 4, 5).unwrap();
        for e in &mut d.entries {
            let nodes = crate::worldgen::sample_nodes(&e.world, 20, 3).unwrap();
            e.nodes = nodes;
        }
        let all = eval::instances(&d, sensor).unwrap();
        (all[..3].to_vec(), all[3..].to_vec())
    }

    #[test]
    fn table_one_consistency_is_enforced() {
        let mut c = TrainConfig {
            algorithm: Algorithm::QvalAgg,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::ConfigMismatch(_))));
        c.spec = ProblemSpec::budgeted(10, 12.0);
        c.validate().unwrap();
        c.algorithm = Algorithm::RewardFt;
        assert!(matches!(c.validate(), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn schedules() {
        assert_eq!(MixSchedule::FirstOracle.alpha(1), 1.0);
        assert_eq!(MixSchedule::FirstOracle.alpha(2), 0.0);
        assert_eq!(MixSchedule::Exponential { p: 0.5 }.alpha(3), 0.25);
        assert!(MixSchedule::Constant { alpha: 1.5 }.validate().is_err());
    }

    #[test]
    fn aggregation_grows_the_dataset_monotonically() {
        let cfg = small_config(Algorithm::RewardAgg);
        let (tr, va) = worlds(cfg.sensor);
        let out = train_aggregate(&cfg, &tr, &va).unwrap();
        let mut total = 0;
        for r in &out.report.records {
            total += r.new_examples;
            assert_eq!(r.dataset_size, total);
        }
        assert_eq!(out.dataset.len(), total);
        assert_eq!(out.labels.len(), total);
        let best = out.report.records.iter().map(|r| r.validation_reward).fold(f64::MIN, f64::max);
        assert_eq!(out.report.records[out.report.selected - 1].validation_reward, best);
    }

    #[test]
    fn first_iteration_with_oracle_rollin_has_full_batches() {
        let cfg = TrainConfig {
            iterations: 1,
            ..small_config(Algorithm::RewardAgg)
        };
        let (tr, va) = worlds(cfg.sensor);
        let out = train_aggregate(&cfg, &tr, &va).unwrap();
        assert_eq!(out.dataset.len(), cfg.episodes * cfg.actions_per_state);
    }

    #[test]
    fn labels_survive_an_audit() {
        for algo in [Algorithm::RewardAgg, Algorithm::QvalAgg] {
            let cfg = small_config(algo);
            let (tr, va) = worlds(cfg.sensor);
            let out = train_aggregate(&cfg, &tr, &va).unwrap();
            for (l, e) in out.labels.iter().zip(&out.dataset.examples) {
                assert_eq!(audit_label(&cfg, &tr[l.world], l).unwrap(), l.target);
                assert_eq!(e.target, l.target);
                assert_eq!(e.t, l.path.len());
            }
        }
    }

    #[test]
    fn forward_training_has_one_record_per_timestep() {
        let cfg = small_config(Algorithm::RewardFt);
        let (tr, va) = worlds(cfg.sensor);
        let out = train_forward(&cfg, &tr, &va).unwrap();
        assert_eq!(out.report.records.len(), cfg.spec.horizon);
        match &out.policy.models {
            crate::learner::PolicyModels::NonStationary(ms) => assert_eq!(ms.len(), cfg.spec.horizon),
            _ => panic!("forward training returns a non-stationary policy"),
        }
        assert!(out.labels.iter().all(|l| l.path.len() <= cfg.spec.horizon));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_config(Algorithm::QvalAgg);
        let (tr, va) = worlds(cfg.sensor);
        let a = train(&cfg, &tr, &va).unwrap();
        let b = train(&cfg, &tr, &va).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.report.to_csv(), b.report.to_csv());
    }

    #[test]
    fn wrong_procedure_is_rejected() {
        let cfg = small_config(Algorithm::RewardFt);
        let (tr, va) = worlds(cfg.sensor);
        assert!(matches!(train_aggregate(&cfg, &tr, &va), Err(Error::ConfigMismatch(_))));
    }
}
