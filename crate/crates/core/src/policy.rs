//! Episodes and the policy interface shared by oracles, heuristics and
//! learnt policies.

use rand::seq::IndexedRandom;

use std::cell::RefCell;

use crate::belief::{ig_features, motion_features, Belief, Occ, FeatureConfig, FeatureVector, NUM_IG_FEATURES};
use crate::error::{Error, Result};
use crate::oracles::{oracle_act, OracleKind};
use crate::rng::Rng;
use crate::utility::{feasible_actions, CoverageState, Instance, ProblemSpec};
use crate::worldgen::{NodeId, NodeSet};

/// One run of the information-gathering process on a hidden world.
///
/// The start node is observed on construction. Each [`Episode::step`] moves
/// to a node, collects its reward, measures, and folds the measurement into
/// the belief.
///
/// Belief-only feature components are cached per node and dropped for nodes
/// near cells whose belief changed, so repeated queries cost only the motion
/// components. Cached values are identical to fresh ones.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    inst: &'a Instance,
    spec: ProblemSpec,
    state: CoverageState,
    belief: Belief,
    cache: RefCell<FeatureCache>,
}

#[derive(Debug, Clone, Default)]
struct FeatureCache {
    cfg: Option<FeatureConfig>,
    ig: Vec<Option<[f64; NUM_IG_FEATURES]>>,
}

impl<'a> Episode<'a> {
    pub fn new(inst: &'a Instance, spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let mut belief = Belief::for_world(inst.world());
        let start = inst.nodes().start_id();
        belief.update(start, inst.measure(start)?)?;
        Ok(Self {
            inst,
            spec,
            state: CoverageState::new(inst),
            belief,
            cache: RefCell::default(),
        })
    }

    /// The hidden world. Only clairvoyant policies may look at it.
    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn nodes(&self) -> &'a NodeSet {
        self.inst.nodes()
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn state(&self) -> &CoverageState {
        &self.state
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    /// Actions taken so far; the next action is taken at timestep `t() + 1`.
    pub fn t(&self) -> usize {
        self.state.steps()
    }

    pub fn feasible(&self) -> Vec<NodeId> {
        if self.t() >= self.spec.horizon {
            return Vec::new();
        }
        feasible_actions(&self.state, self.inst.nodes(), &self.spec)
    }

    pub fn features(&self, action: NodeId, cfg: &FeatureConfig) -> Result<FeatureVector> {
        let nodes = self.inst.nodes();
        let node = nodes.get(action)?;
        let ig = {
            let mut cache = self.cache.borrow_mut();
            if cache.cfg.as_ref() != Some(cfg) {
                cache.cfg = Some(*cfg);
                cache.ig = vec![None; nodes.len()];
            }
            *cache.ig[action].get_or_insert_with(|| ig_features(&self.belief, node, cfg))
        };
        motion_features(ig, self.state.visited(), self.state.cost(), action, nodes, &self.spec)
    }

    /// Drops cached features of nodes within reach of a cell whose belief
    /// `m` is about to change.
    fn invalidate(&mut self, m: &crate::sensor::Measurement) {
        let cache = self.cache.get_mut();
        let Some(cfg) = cache.cfg else { return };
        let (w, h) = (self.belief.width(), self.belief.height());
        let changed: Vec<usize> = m
            .free_cells
            .iter()
            .chain(&m.hit_cells)
            .copied()
            .filter(|&c| self.belief.cell(c) == Occ::Unknown)
            .collect();
        if changed.is_empty() {
            return;
        }
        // 2D prefix counts of changed cells
        let mut sum = vec![0u32; (w + 1) * (h + 1)];
        for &c in &changed {
            sum[(c / w + 1) * (w + 1) + c % w + 1] = 1;
        }
        for y in 1..=h {
            for x in 1..=w {
                let i = y * (w + 1) + x;
                sum[i] += sum[i - 1] + sum[i - w - 1] - sum[i - w - 2];
            }
        }
        // rays reach max_range, plus a rear cell and a frontier neighbour
        let res = self.belief.resolution();
        let margin = (cfg.sensor.max_range / res).ceil() + 4.0;
        let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
        for n in self.inst.nodes().nodes() {
            let (gx, gy) = (n.x / res, n.y / res);
            let (x0, x1) = (clamp((gx - margin).floor(), w), clamp((gx + margin).ceil() + 1.0, w));
            let (y0, y1) = (clamp((gy - margin).floor(), h), clamp((gy + margin).ceil() + 1.0, h));
            let inside = sum[y1 * (w + 1) + x1] + sum[y0 * (w + 1) + x0] - sum[y0 * (w + 1) + x1] - sum[y1 * (w + 1) + x0];
            if inside > 0 {
                cache.ig[n.id] = None;
            }
        }
    }

    /// Reward `action` would earn, without taking it.
    pub fn reward_of(&self, action: NodeId) -> f64 {
        self.state.reward(self.inst, action)
    }

    pub fn step(&mut self, action: NodeId) -> Result<f64> {
        let m = self.inst.measure(action)?;
        let r = self.state.apply(self.inst, action)?;
        self.invalidate(&m);
        self.belief.update(action, m)?;
        Ok(r)
    }

    pub fn coverage(&self) -> f64 {
        self.state.coverage(self.inst)
    }
}

/// Anything that picks the next node of an episode.
pub trait Policy: Sync {
    fn name(&self) -> String;

    /// Chooses one of `feasible` (never empty, ascending ids).
    fn act(&self, episode: &Episode<'_>, feasible: &[NodeId], rng: &mut Rng) -> Result<NodeId>;
}

/// Uniformly random feasible action.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, _: &Episode<'_>, feasible: &[NodeId], rng: &mut Rng) -> Result<NodeId> {
        feasible.choose(rng).copied().ok_or(Error::NoFeasibleAction)
    }
}

/// Clairvoyant oracle acting on the hidden world.
#[derive(Debug, Clone, Copy)]
pub struct OraclePolicy(pub OracleKind);

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        match self.0 {
            OracleKind::Greedy => "oracle-greedy".into(),
            OracleKind::Gcb => "oracle-gcb".into(),
        }
    }

    fn act(&self, ep: &Episode<'_>, _: &[NodeId], _: &mut Rng) -> Result<NodeId> {
        oracle_act(self.0, ep.instance(), ep.state(), ep.spec())
    }
}

/// Index of the largest score, first index on ties.
pub(crate) fn argmax_first(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}
