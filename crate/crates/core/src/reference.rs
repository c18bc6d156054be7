//! Exhaustive reference computations on tiny enumerable instances.
//!
//! A [`TinyEnsemble`] is a handful of worlds sharing one node set, with a
//! uniform prior. The sensor is deterministic, so the posterior after a
//! belief-driven roll-in is uniform over the worlds that reproduce every
//! measurement. Everything here is exhaustive enumeration; the size caps keep
//! each call to a few thousand terms.
//!
//! Values are MDP values: expected sums of one-step rewards after the start
//! node, excluding the start node's own coverage.

use std::f64::consts::TAU;

use rand::Rng as _;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::oracles::{greedy_step, q_value_to_go, OracleKind};
use crate::policy::{Episode, Policy};
use crate::rng;
use crate::sensor::{Measurement, SensorConfig};
use crate::utility::{feasible_actions, CoverageState, Instance, ProblemSpec};
use crate::worldgen::{Cell, CellIndex, Node, NodeId, NodeSet, WorldMap};

pub const MAX_ENSEMBLE_WORLDS: usize = 16;
/// Caps for [`brute_force_path`].
pub const MAX_PATH_NODES: usize = 10;
pub const MAX_PATH_HORIZON: usize = 4;
/// Caps for [`optimal_adaptive_value`].
pub const MAX_DP_NODES: usize = 8;
pub const MAX_DP_HORIZON: usize = 3;
pub const MAX_DP_WORLDS: usize = 8;

/// Scores within this distance of the maximum count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Worlds with a shared node set and a uniform prior.
#[derive(Debug, Clone)]
pub struct TinyEnsemble {
    worlds: Vec<Instance>,
    /// `meas[w][v]`: what node `v` measures in world `w`.
    meas: Vec<Vec<Measurement>>,
}

impl TinyEnsemble {
    pub fn new(worlds: Vec<WorldMap>, nodes: NodeSet, sensor: SensorConfig) -> Result<Self> {
        if worlds.is_empty() || worlds.len() > MAX_ENSEMBLE_WORLDS {
            return Err(Error::InstanceTooLarge(format!(
                "ensembles hold 1..={MAX_ENSEMBLE_WORLDS} worlds, got {}",
                worlds.len()
            )));
        }
        let dims = (worlds[0].width(), worlds[0].height(), worlds[0].resolution());
        let mut instances = Vec::with_capacity(worlds.len());
        for w in worlds {
            if (w.width(), w.height(), w.resolution()) != dims {
                return Err(Error::InvalidConfig("ensemble worlds must share dimensions".into()));
            }
            let nodes = NodeSet::new(nodes.nodes().to_vec(), nodes.start_id(), &w)?;
            instances.push(Instance::new(w, nodes, sensor)?);
        }
        let meas = instances
            .iter()
            .map(|inst| (0..inst.nodes().len()).map(|v| inst.measure(v)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(Self { worlds: instances, meas })
    }

    /// A random ensemble on a 12×12 grid: each world holds two to four small
    /// rectangles; nodes sit at centres of cells free in every world.
    pub fn generate(seed: u64, num_worlds: usize, num_nodes: usize) -> Result<Self> {
        let sensor = SensorConfig {
            num_rays: 64,
            fov: TAU,
            max_range: 5.0,
        };
        Self::generate_with(seed, num_worlds, num_nodes, sensor)
    }

    /// [`TinyEnsemble::generate`] with a caller-chosen sensor.
    pub fn generate_with(seed: u64, num_worlds: usize, num_nodes: usize, sensor: SensorConfig) -> Result<Self> {
        const SIDE: usize = 12;
        let mut rng = rng::root(seed);
        for _attempt in 0..100 {
            let mut grids = Vec::with_capacity(num_worlds);
            for _ in 0..num_worlds {
                let mut cells = vec![Cell::Free; SIDE * SIDE];
                for _ in 0..rng.random_range(2..=4) {
                    let (w, h) = (rng.random_range(1..=3), rng.random_range(1..=3));
                    let x0 = rng.random_range(0..=SIDE - w);
                    let y0 = rng.random_range(0..=SIDE - h);
                    for y in y0..y0 + h {
                        for x in x0..x0 + w {
                            cells[y * SIDE + x] = Cell::Occupied;
                        }
                    }
                }
                grids.push(cells);
            }
            let free: Vec<usize> = (0..SIDE * SIDE)
                .filter(|&c| grids.iter().all(|g| g[c] == Cell::Free))
                .collect();
            if free.len() < num_nodes {
                continue;
            }
            let picks = rand::seq::index::sample(&mut rng, free.len(), num_nodes);
            let nodes: Vec<Node> = picks
                .into_iter()
                .enumerate()
                .map(|(id, p)| Node {
                    id,
                    x: (free[p] % SIDE) as f64 + 0.5,
                    y: (free[p] / SIDE) as f64 + 0.5,
                    heading: 0.0,
                })
                .collect();
            let worlds = grids
                .into_iter()
                .map(|g| WorldMap::new(SIDE, SIDE, 1.0, g))
                .collect::<Result<Vec<_>>>()?;
            let node_set = NodeSet::new(nodes, 0, &worlds[0])?;
            match Self::new(worlds, node_set, sensor) {
                Ok(e) => return Ok(e),
                Err(Error::ZeroCoverableWorld) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::InvalidConfig("could not draw a coverable ensemble".into()))
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[Instance] {
        &self.worlds
    }

    pub fn nodes(&self) -> &NodeSet {
        self.worlds[0].nodes()
    }

    pub fn prior(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }

    pub fn measurement(&self, world: usize, v: NodeId) -> &Measurement {
        &self.meas[world][v]
    }

    fn consistent(&self, world: usize, history: &[(NodeId, Measurement)]) -> bool {
        history.iter().all(|(v, y)| self.meas[world].get(*v) == Some(y))
    }

    /// The state after visiting `visited` (start node first) in `world`.
    pub fn state(&self, world: usize, visited: &[NodeId]) -> Result<CoverageState> {
        let inst = &self.worlds[world];
        if visited.first() != Some(&inst.nodes().start_id()) {
            return Err(Error::InvalidConfig("paths begin at the start node".into()));
        }
        let mut s = CoverageState::new(inst);
        for &v in &visited[1..] {
            s.apply(inst, v)?;
        }
        Ok(s)
    }

    /// The belief after visiting `visited` in `world`.
    pub fn belief(&self, world: usize, visited: &[NodeId]) -> Result<Belief> {
        let mut b = Belief::for_world(self.worlds[world].world());
        for &v in visited {
            b.update(v, self.meas[world][v].clone())?;
        }
        Ok(b)
    }
}

/// Uniform weights over the worlds consistent with every record of
/// `history`, zero elsewhere.
pub fn exact_posterior(ens: &TinyEnsemble, history: &[(NodeId, Measurement)]) -> Result<Vec<f64>> {
    let ok: Vec<bool> = (0..ens.len()).map(|w| ens.consistent(w, history)).collect();
    let n = ok.iter().filter(|&&b| b).count();
    if n == 0 {
        return Err(Error::NoConsistentWorld);
    }
    Ok(ok.iter().map(|&b| if b { 1.0 / n as f64 } else { 0.0 }).collect())
}

/// Optimal known-world path by exhaustive search over feasible sequences of
/// at most `spec.horizon` actions. Returns the path (start node first) and
/// its coverage. The first optimum in lexicographic order wins.
pub fn brute_force_path(inst: &Instance, spec: &ProblemSpec) -> Result<(Vec<NodeId>, f64)> {
    spec.validate()?;
    if inst.nodes().len() > MAX_PATH_NODES || spec.horizon > MAX_PATH_HORIZON {
        return Err(Error::InstanceTooLarge(format!(
            "brute force handles |V| ≤ {MAX_PATH_NODES} and T ≤ {MAX_PATH_HORIZON}"
        )));
    }
    fn search(
        inst: &Instance,
        spec: &ProblemSpec,
        state: &CoverageState,
        best: &mut (Vec<NodeId>, usize),
    ) {
        if state.covered_count() > best.1 {
            *best = (state.visited().to_vec(), state.covered_count());
        }
        if state.steps() >= spec.horizon {
            return;
        }
        for a in feasible_actions(state, inst.nodes(), spec) {
            let mut next = state.clone();
            next.apply(inst, a).expect("feasible action");
            search(inst, spec, &next, best);
        }
    }
    let start = CoverageState::new(inst);
    let mut best = (start.visited().to_vec(), start.covered_count());
    search(inst, spec, &start, &mut best);
    let utility = best.1 as f64 / inst.denominator() as f64;
    Ok((best.0, utility))
}

/// The clairvoyant oracle's path on a known world, start node first.
pub fn oracle_path(kind: OracleKind, inst: &Instance, spec: &ProblemSpec) -> Result<Vec<NodeId>> {
    let mut s = CoverageState::new(inst);
    while s.steps() < spec.horizon {
        let a = match kind {
            OracleKind::Greedy => greedy_step(inst, &s, spec),
            OracleKind::Gcb => crate::oracles::oracle_act(kind, inst, &s, spec),
        };
        match a {
            Ok(a) => s.apply(inst, a)?,
            Err(Error::NoFeasibleAction) => break,
            Err(e) => return Err(e),
        };
    }
    Ok(s.visited().to_vec())
}

/// What the hallucinating oracle takes the posterior expectation of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hallucination {
    /// The one-step reward.
    OneStep,
    /// The clairvoyant value-to-go over the remaining horizon.
    ValueToGo(OracleKind),
}

fn argmax_tolerant(actions: &[NodeId], scores: &[f64]) -> Result<NodeId> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    actions
        .iter()
        .zip(scores)
        .find(|(_, &s)| s >= max - TIE_TOLERANCE)
        .map(|(&a, _)| a)
        .ok_or(Error::NoFeasibleAction)
}

/// Expected clairvoyant value of each feasible action under the posterior
/// of `belief`, and the maximizer (lowest id among ties).
pub fn hallucinating_act(
    ens: &TinyEnsemble,
    visited: &[NodeId],
    belief: &Belief,
    spec: &ProblemSpec,
    target: Hallucination,
) -> Result<NodeId> {
    let post = exact_posterior(ens, belief.history())?;
    let steps_remaining = spec.horizon.saturating_sub(visited.len() - 1);
    let states = (0..ens.len())
        .map(|w| if post[w] > 0.0 { ens.state(w, visited).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>>>()?;
    let any = states.iter().flatten().next().ok_or(Error::NoConsistentWorld)?;
    let feasible = feasible_actions(any, ens.nodes(), spec);
    let mut scores = Vec::with_capacity(feasible.len());
    for &a in &feasible {
        let mut e = 0.0;
        for (w, s) in states.iter().enumerate() {
            let Some(s) = s else { continue };
            let q = match target {
                Hallucination::OneStep => s.reward(&ens.worlds[w], a),
                Hallucination::ValueToGo(kind) => q_value_to_go(kind, &ens.worlds[w], s, a, steps_remaining, spec)?,
            };
            e += post[w] * q;
        }
        scores.push(e);
    }
    argmax_tolerant(&feasible, &scores)
}

/// The adaptive greedy rule: highest expected marginal gain under the
/// posterior, with gains recomputed from scratch.
pub fn adaptive_greedy_act(ens: &TinyEnsemble, visited: &[NodeId], belief: &Belief, spec: &ProblemSpec) -> Result<NodeId> {
    let post = exact_posterior(ens, belief.history())?;
    let w0 = post.iter().position(|&p| p > 0.0).ok_or(Error::NoConsistentWorld)?;
    let feasible = feasible_actions(&ens.state(w0, visited)?, ens.nodes(), spec);
    let scores = feasible
        .iter()
        .map(|&a| {
            (0..ens.len())
                .filter(|&w| post[w] > 0.0)
                .map(|w| Ok(post[w] * ens.worlds[w].marginal_gain(a, visited)?))
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<_>>>()?;
    argmax_tolerant(&feasible, &scores)
}

/// Prior-expected sum of rewards of a belief policy, `choose(visited,
/// belief)`, run to the horizon on every world.
pub fn adaptive_value(
    ens: &TinyEnsemble,
    spec: &ProblemSpec,
    mut choose: impl FnMut(&[NodeId], &Belief) -> Result<NodeId>,
) -> Result<f64> {
    let mut total = 0.0;
    for w in 0..ens.len() {
        let inst = &ens.worlds[w];
        let mut s = CoverageState::new(inst);
        let mut b = ens.belief(w, s.visited())?;
        let mut gained = 0.0;
        while s.steps() < spec.horizon && !feasible_actions(&s, inst.nodes(), spec).is_empty() {
            let a = choose(s.visited(), &b)?;
            gained += s.apply(inst, a)?;
            b.update(a, ens.meas[w][a].clone())?;
        }
        total += gained;
    }
    Ok(total / ens.len() as f64)
}

/// Optimal adaptive value by backward induction over belief states
/// (visited path, set of worlds consistent with the observations).
pub fn optimal_adaptive_value(ens: &TinyEnsemble, spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    if ens.nodes().len() > MAX_DP_NODES || spec.horizon > MAX_DP_HORIZON || ens.len() > MAX_DP_WORLDS {
        return Err(Error::InstanceTooLarge(format!(
            "belief-space DP handles |V| ≤ {MAX_DP_NODES}, T ≤ {MAX_DP_HORIZON}, ≤ {MAX_DP_WORLDS} worlds"
        )));
    }
    // value of a belief state: worlds in `alive` share every observation so far
    fn value(ens: &TinyEnsemble, spec: &ProblemSpec, states: &[CoverageState], alive: &[usize], left: usize) -> f64 {
        if left == 0 {
            return 0.0;
        }
        let rep = &states[alive[0]];
        let feasible = feasible_actions(rep, ens.nodes(), spec);
        let mut best = 0.0f64;
        for a in feasible {
            let mut next = states.to_vec();
            let mut v = 0.0;
            for &w in alive {
                v += next[w].apply(&ens.worlds[w], a).expect("feasible action");
            }
            // split the alive worlds by what `a` reveals
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for &w in alive {
                match groups.iter_mut().find(|g| ens.meas[g[0]][a] == ens.meas[w][a]) {
                    Some(g) => g.push(w),
                    None => groups.push(vec![w]),
                }
            }
            for g in &groups {
                v += g.len() as f64 * value(ens, spec, &next, g, left - 1);
            }
            best = best.max(v / alive.len() as f64);
        }
        best
    }
    let states: Vec<CoverageState> = ens.worlds.iter().map(CoverageState::new).collect();
    // the start measurement already partitions the prior
    let start = ens.nodes().start_id();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for w in 0..ens.len() {
        match groups.iter_mut().find(|g| ens.meas[g[0]][start] == ens.meas[w][start]) {
            Some(g) => g.push(w),
            None => groups.push(vec![w]),
        }
    }
    let total: f64 = groups
        .iter()
        .map(|g| g.len() as f64 * value(ens, spec, &states, g, spec.horizon))
        .sum();
    Ok(total / ens.len() as f64)
}

/// A roll-in policy: at every step the clairvoyant oracle with probability
/// `alpha`, otherwise the deterministic belief policy `learner`.
#[derive(Clone, Copy)]
pub struct RollIn<'p> {
    pub alpha: f64,
    pub oracle: OracleKind,
    pub learner: &'p dyn Policy,
}

/// One way a roll-in can unfold on a world.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub world: usize,
    pub prob: f64,
    pub visited: Vec<NodeId>,
}

/// Every branch of rolling in `t - 1` steps on every world, with its
/// probability given the world.
pub fn enumerate_rollin(ens: &TinyEnsemble, spec: &ProblemSpec, roll_in: &RollIn<'_>, t: usize) -> Result<Vec<Branch>> {
    let mut out = Vec::new();
    for w in 0..ens.len() {
        let inst = &ens.worlds[w];
        let mut frontier = vec![(1.0, Episode::new(inst, *spec)?)];
        for _ in 1..t {
            let mut next = Vec::new();
            for (p, ep) in frontier {
                let feasible = ep.feasible();
                if feasible.is_empty() {
                    next.push((p, ep));
                    continue;
                }
                let mut options: Vec<(f64, NodeId)> = Vec::new();
                if roll_in.alpha > 0.0 {
                    let a = crate::oracles::oracle_act(roll_in.oracle, inst, ep.state(), spec)?;
                    options.push((roll_in.alpha, a));
                }
                if roll_in.alpha < 1.0 {
                    let a = roll_in.learner.act(&ep, &feasible, &mut rng::root(0))?;
                    match options.iter_mut().find(|(_, b)| *b == a) {
                        Some(o) => o.0 += 1.0 - roll_in.alpha,
                        None => options.push((1.0 - roll_in.alpha, a)),
                    }
                }
                for (q, a) in options {
                    let mut e = ep.clone();
                    e.step(a)?;
                    next.push((p * q, e));
                }
            }
            frontier = next;
        }
        for (prob, ep) in frontier {
            out.push(Branch {
                world: w,
                prob,
                visited: ep.state().visited().to_vec(),
            });
        }
    }
    Ok(out)
}

/// Both sides of the identity between imitating the clairvoyant oracle and
/// imitating the hallucinating oracle, for action `a` at timestep `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollInGap {
    /// `E_φ E_{s|φ} Q(s, φ, a)`
    pub lhs: f64,
    /// `E_φ E_{ψ|φ} E_{φ'|ψ} Q(s, φ', a)`
    pub rhs: f64,
    pub gap: f64,
}

/// Computes [`RollInGap`] by enumeration. The posterior over `φ'` given a
/// roll-in history is Bayes' rule with the probability that the roll-in
/// reproduces that history (path and measurements) on `φ'`.
pub fn rollin_identity_check(
    ens: &TinyEnsemble,
    spec: &ProblemSpec,
    roll_in: &RollIn<'_>,
    t: usize,
    a: NodeId,
) -> Result<RollInGap> {
    let branches = enumerate_rollin(ens, spec, roll_in, t)?;
    let prior = ens.prior();
    let kind = roll_in.oracle;
    let steps = spec.horizon + 1 - t;
    let q = |w: usize, visited: &[NodeId]| -> Result<f64> {
        q_value_to_go(kind, &ens.worlds[w], &ens.state(w, visited)?, a, steps, spec)
    };
    let same_history = |b: &Branch, c: &Branch| {
        b.visited == c.visited && b.visited.iter().all(|&v| ens.meas[b.world][v] == ens.meas[c.world][v])
    };
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for b in &branches {
        let weight = prior[b.world] * b.prob;
        lhs += weight * q(b.world, &b.visited)?;
        // P(φ' | ψ) ∝ P(φ') P(ψ | φ')
        let likelihood: Vec<(usize, f64)> = branches
            .iter()
            .filter(|c| same_history(b, c))
            .map(|c| (c.world, prior[c.world] * c.prob))
            .collect();
        let z: f64 = likelihood.iter().map(|(_, p)| p).sum();
        let mut inner = 0.0;
        for &(w, p) in &likelihood {
            inner += p / z * q(w, &b.visited)?;
        }
        rhs += weight * inner;
    }
    Ok(RollInGap {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Cells a ray passes through, found by sampling points every 0.01 cells
/// and bisecting any step that jumps diagonally. Independent of the
/// incremental traversal used by the sensor; same output contract as
/// [`crate::sensor::trace_ray`].
pub fn marching_ray_cells(world: &WorldMap, x: f64, y: f64, bearing: f64, max_range: f64) -> Vec<CellIndex> {
    const STEP: f64 = 0.01;
    let res = world.resolution();
    let (ox, oy) = (x / res, y / res);
    let (dx, dy) = (bearing.cos(), bearing.sin());
    let at = |t: f64| ((ox + t * dx).floor() as i64, (oy + t * dy).floor() as i64);
    // the traversal reports cells entered strictly before the range limit
    let end = (max_range / res) * (1.0 - 1e-12);

    fn refine(at: &dyn Fn(f64) -> (i64, i64), ta: f64, a: (i64, i64), tb: f64, b: (i64, i64), out: &mut Vec<(i64, i64)>) {
        let jump = (a.0 - b.0).abs() + (a.1 - b.1).abs();
        if jump == 0 {
            return;
        }
        if jump == 1 {
            out.push(b);
            return;
        }
        if tb - ta < 1e-13 {
            // through a corner: the traversal steps along y on exact ties
            out.push((a.0, b.1));
            out.push(b);
            return;
        }
        let tm = 0.5 * (ta + tb);
        let m = at(tm);
        refine(at, ta, a, tm, m, out);
        refine(at, tm, m, tb, b, out);
    }

    let mut raw = vec![at(0.0)];
    let mut t = 0.0;
    let mut prev = raw[0];
    while t < end {
        let tn = (t + STEP).min(end);
        let c = at(tn);
        refine(&at, t, prev, tn, c, &mut raw);
        prev = c;
        t = tn;
    }
    let (w, h) = (world.width() as i64, world.height() as i64);
    let mut cells = Vec::new();
    for (cx, cy) in raw {
        if cx < 0 || cy < 0 || cx >= w || cy >= h {
            break;
        }
        let idx = (cy * w + cx) as CellIndex;
        cells.push(idx);
        if world.is_occupied(idx) {
            break;
        }
    }
    cells
}
