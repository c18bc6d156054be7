//! Fractional coverage utility, one-step rewards, travel cost and the
//! feasible action set.
//!
//! Coverage is normalised by the number of surface cells the full node set
//! can see (`D`), so `coverage(V) = 1` and every reward lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{raycast, Measurement, SensorConfig};
use crate::worldgen::{CellIndex, NodeId, NodeSet, WorldMap};

/// A world paired with its node set and sensor, with every node's view cached.
#[derive(Debug, Clone)]
pub struct Instance {
    world: WorldMap,
    nodes: NodeSet,
    sensor: SensorConfig,
    views: Vec<Vec<u32>>,
    denominator: usize,
}

impl Instance {
    pub fn new(world: WorldMap, nodes: NodeSet, sensor: SensorConfig) -> Result<Self> {
        let views = nodes
            .nodes()
            .iter()
            .map(|n| raycast(&world, n, &sensor).map(|m| m.hit_cells.iter().map(|&c| c as u32).collect()))
            .collect::<Result<Vec<Vec<u32>>>>()?;
        let mut seen = vec![false; world.len()];
        let mut denominator = 0;
        for &c in views.iter().flatten() {
            if !std::mem::replace(&mut seen[c as usize], true) {
                denominator += 1;
            }
        }
        if denominator == 0 {
            return Err(Error::ZeroCoverableWorld);
        }
        Ok(Self {
            world,
            nodes,
            sensor,
            views,
            denominator,
        })
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn sensor(&self) -> &SensorConfig {
        &self.sensor
    }

    /// Surface cells attainable from the whole node set.
    pub fn denominator(&self) -> usize {
        self.denominator
    }

    /// Cached covered cells of node `v`.
    pub fn view(&self, v: NodeId) -> &[u32] {
        &self.views[v]
    }

    /// Full measurement at `v` (recomputed; only the hit cells are cached).
    pub fn measure(&self, v: NodeId) -> Result<Measurement> {
        raycast(&self.world, self.nodes.get(v)?, &self.sensor)
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.views.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }

    /// `|∪ views(visited)|`, from scratch.
    pub fn covered_count(&self, visited: &[NodeId]) -> Result<usize> {
        let mut seen = vec![false; self.world.len()];
        let mut n = 0;
        for &v in visited {
            self.check(v)?;
            for &c in &self.views[v] {
                if !std::mem::replace(&mut seen[c as usize], true) {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn coverage(&self, visited: &[NodeId]) -> Result<f64> {
        Ok(self.covered_count(visited)? as f64 / self.denominator as f64)
    }

    /// `coverage(visited ∪ {v}) − coverage(visited)`.
    pub fn marginal_gain(&self, v: NodeId, visited: &[NodeId]) -> Result<f64> {
        self.check(v)?;
        let mut seen = vec![false; self.world.len()];
        for &u in visited {
            self.check(u)?;
            for &c in &self.views[u] {
                seen[c as usize] = true;
            }
        }
        let gain = self.views[v].iter().filter(|&&c| !seen[c as usize]).count();
        Ok(gain as f64 / self.denominator as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// No travel budget.
    Unc,
    /// Travel budget `Ω`.
    Con,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Number of actions after the start node.
    pub horizon: usize,
    /// Travel budget in meters; `None` means unbounded.
    pub budget: Option<f64>,
    #[serde(default)]
    pub allow_revisits: bool,
}

impl ProblemSpec {
    pub fn unconstrained(horizon: usize) -> Self {
        Self {
            horizon,
            budget: None,
            allow_revisits: false,
        }
    }

    pub fn budgeted(horizon: usize, budget: f64) -> Self {
        Self {
            horizon,
            budget: Some(budget),
            allow_revisits: false,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.budget.is_some() {
            Variant::Con
        } else {
            Variant::Unc
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if let Some(b) = self.budget {
            if b.is_nan() || b <= 0.0 {
                return Err(Error::InvalidConfig("budget must be positive".into()));
            }
        }
        Ok(())
    }
}

/// The MDP state: nodes visited so far and the cells they cover.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageState {
    visited: Vec<NodeId>,
    covered: Vec<bool>,
    covered_count: usize,
    cost: f64,
}

impl CoverageState {
    /// State after observing from the start node.
    pub fn new(inst: &Instance) -> Self {
        let mut s = Self {
            visited: Vec::new(),
            covered: vec![false; inst.world.len()],
            covered_count: 0,
            cost: 0.0,
        };
        s.cover(inst, inst.nodes.start_id());
        s.visited.push(inst.nodes.start_id());
        s
    }

    fn cover(&mut self, inst: &Instance, v: NodeId) -> usize {
        let mut gained = 0;
        for &c in &inst.views[v] {
            if !std::mem::replace(&mut self.covered[c as usize], true) {
                gained += 1;
            }
        }
        self.covered_count += gained;
        gained
    }

    pub fn visited(&self) -> &[NodeId] {
        &self.visited
    }

    pub fn current(&self) -> NodeId {
        *self.visited.last().expect("state always holds the start node")
    }

    /// Number of actions taken.
    pub fn steps(&self) -> usize {
        self.visited.len() - 1
    }

    /// Travel cost so far, accumulated edge by edge in path order.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    pub fn is_covered(&self, cell: CellIndex) -> bool {
        self.covered[cell]
    }

    pub fn coverage(&self, inst: &Instance) -> f64 {
        self.covered_count as f64 / inst.denominator as f64
    }

    /// Uncovered cells in the view of `v`.
    pub fn gain_count(&self, inst: &Instance, v: NodeId) -> usize {
        inst.views[v].iter().filter(|&&c| !self.covered[c as usize]).count()
    }

    /// Normalised marginal gain of visiting `action` next; 0 for revisits.
    pub fn reward(&self, inst: &Instance, action: NodeId) -> f64 {
        self.gain_count(inst, action) as f64 / inst.denominator as f64
    }

    /// Moves to `action`, returning the reward collected.
    pub fn apply(&mut self, inst: &Instance, action: NodeId) -> Result<f64> {
        inst.check(action)?;
        let nodes = inst.nodes.nodes();
        self.cost += nodes[self.current()].distance_to(&nodes[action]);
        self.visited.push(action);
        Ok(self.cover(inst, action) as f64 / inst.denominator as f64)
    }

    /// Recomputes the covered set from scratch and compares.
    pub fn is_consistent(&self, inst: &Instance) -> bool {
        let mut fresh = vec![false; inst.world.len()];
        for &v in &self.visited {
            for &c in &inst.views[v] {
                fresh[c as usize] = true;
            }
        }
        fresh == self.covered && fresh.iter().filter(|&&b| b).count() == self.covered_count
    }

    /// Remaining budget, `None` when unconstrained.
    pub fn remaining_budget(&self, spec: &ProblemSpec) -> Option<f64> {
        spec.budget.map(|b| b - self.cost)
    }
}

/// Sum of consecutive Euclidean distances along `path`.
pub fn travel_cost(path: &[NodeId], nodes: &NodeSet) -> Result<f64> {
    let mut cost = 0.0;
    for w in path.windows(2) {
        cost += nodes.get(w[0])?.distance_to(nodes.get(w[1])?);
    }
    if let Some(&v) = path.first() {
        nodes.get(v)?;
    }
    Ok(cost)
}

/// Actions that keep the trajectory within budget; empty ends the episode.
pub fn feasible_actions(state: &CoverageState, nodes: &NodeSet, spec: &ProblemSpec) -> Vec<NodeId> {
    let all = nodes.nodes();
    let here = &all[state.current()];
    let mut visited = vec![false; all.len()];
    for &v in &state.visited {
        visited[v] = true;
    }
    all.iter()
        .filter(|n| spec.allow_revisits || !visited[n.id])
        .filter(|n| match spec.budget {
            None => true,
            Some(b) => state.cost + here.distance_to(n) <= b,
        })
        .map(|n| n.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::Node;

    /// 20x5 corridor with two walls of ten cells each, one above node 0 and
    /// one above node 1; node 2 sits far from both.
    fn corridor() -> Instance {
        let mut occ = Vec::new();
        for x in 0..10 {
            occ.push(4 * 20 + x);
        }
        for x in 10..20 {
            occ.push(x);
        }
        let world = WorldMap::from_occupied(20, 5, 1.0, &occ).unwrap();
        let nodes = vec![
            Node { id: 0, x: 4.5, y: 3.5, heading: 0.0 },
            Node { id: 1, x: 15.5, y: 1.5, heading: 0.0 },
        ];
        let nodes = NodeSet::new(nodes, 0, &world).unwrap();
        Instance::new(world, nodes, SensorConfig { num_rays: 720, fov: std::f64::consts::TAU, max_range: 3.0 }).unwrap()
    }

    #[test]
    fn disjoint_views_add_up() {
        let inst = corridor();
        let a = inst.view(0).len();
        let b = inst.view(1).len();
        assert_eq!(inst.denominator(), a + b);
        assert!((inst.coverage(&[0]).unwrap() - a as f64 / (a + b) as f64).abs() < 1e-15);
        assert_eq!(inst.coverage(&[0, 1]).unwrap(), 1.0);
        assert_eq!(inst.marginal_gain(0, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn rewards_telescope_to_coverage() {
        let inst = corridor();
        let mut s = CoverageState::new(&inst);
        let start = s.coverage(&inst);
        let r = s.apply(&inst, 1).unwrap();
        assert_eq!(start + r, 1.0);
        assert_eq!(s.reward(&inst, 0), 0.0);
        assert!(s.is_consistent(&inst));
    }

    #[test]
    fn three_four_five() {
        let world = WorldMap::empty(10, 10, 1.0).unwrap();
        let nodes = NodeSet::new(
            vec![
                Node { id: 0, x: 0.0, y: 0.0, heading: 0.0 },
                Node { id: 1, x: 3.0, y: 4.0, heading: 0.0 },
                Node { id: 2, x: 3.0, y: 0.0, heading: 0.0 },
            ],
            0,
            &world,
        )
        .unwrap();
        assert_eq!(travel_cost(&[0, 1], &nodes).unwrap(), 5.0);
        assert_eq!(travel_cost(&[1], &nodes).unwrap(), 0.0);
        // 0 -> 1 -> 2 = 5 + 4, 0 -> 2 -> 1 = 3 + 4
        assert_eq!(travel_cost(&[0, 1, 2], &nodes).unwrap(), 9.0);
        assert_eq!(travel_cost(&[0, 2, 1], &nodes).unwrap(), 7.0);
        assert!(matches!(travel_cost(&[0, 7], &nodes), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        let world = WorldMap::from_occupied(10, 10, 1.0, &[99]).unwrap();
        let nodes = NodeSet::new(
            vec![
                Node { id: 0, x: 0.5, y: 0.5, heading: 0.0 },
                Node { id: 1, x: 3.5, y: 4.5, heading: 0.0 },
                Node { id: 2, x: 8.5, y: 8.5, heading: 0.0 },
            ],
            0,
            &world,
        )
        .unwrap();
        let inst = Instance::new(world, nodes.clone(), SensorConfig::default()).unwrap();
        let s = CoverageState::new(&inst);
        assert_eq!(feasible_actions(&s, &nodes, &ProblemSpec::unconstrained(3)), vec![1, 2]);
        assert_eq!(feasible_actions(&s, &nodes, &ProblemSpec::budgeted(3, 5.0)), vec![1]);
        assert!(feasible_actions(&s, &nodes, &ProblemSpec::budgeted(3, 4.99)).is_empty());
    }

    #[test]
    fn zero_coverable_world_is_rejected() {
        let world = WorldMap::from_occupied(30, 30, 1.0, &[0]).unwrap();
        let nodes = NodeSet::new(vec![Node { id: 0, x: 25.5, y: 25.5, heading: 0.0 }], 0, &world).unwrap();
        assert!(matches!(
            Instance::new(world, nodes, SensorConfig::default()),
            Err(Error::ZeroCoverableWorld)
        ));
    }
}
