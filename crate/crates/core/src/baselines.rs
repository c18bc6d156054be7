//! Information-gain heuristics, optionally penalised by travel distance.

use serde::{Deserialize, Serialize};

use crate::belief::{Feature, FeatureConfig, Visibility};
use crate::error::{Error, Result};
use crate::policy::{argmax_first, Episode, Policy};
use crate::rng::Rng;
use crate::worldgen::NodeId;

/// Default per-meter penalty for budgeted problems.
pub const DEFAULT_MOTION_PENALTY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    AverageEntropy,
    RearSideVoxel,
    OcclusionAware,
    UnknownCount,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::AverageEntropy,
        Metric::RearSideVoxel,
        Metric::OcclusionAware,
        Metric::UnknownCount,
    ];

    /// The feature component this heuristic scores with.
    pub fn feature(self) -> Feature {
        match self {
            Metric::AverageEntropy => Feature::AvgEntropyGain,
            Metric::RearSideVoxel => Feature::RearSideVoxelCount,
            Metric::OcclusionAware => Feature::OcclusionAwareGain,
            Metric::UnknownCount => Feature::UnknownCellsInRange,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::AverageEntropy => "average-entropy",
            Metric::RearSideVoxel => "rear-side-voxel",
            Metric::OcclusionAware => "occlusion-aware",
            Metric::UnknownCount => "unknown-count",
        }
    }

    pub fn by_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicPolicy {
    pub metric: Metric,
    /// Score penalty per meter travelled.
    pub motion_penalty: f64,
    #[serde(default)]
    pub visibility: Visibility,
}

impl HeuristicPolicy {
    pub fn new(metric: Metric, motion_penalty: f64) -> Result<Self> {
        if motion_penalty.is_nan() || motion_penalty < 0.0 {
            return Err(Error::InvalidConfig("motion penalty must be non-negative".into()));
        }
        Ok(Self {
            metric,
            motion_penalty,
            visibility: Visibility::Optimistic,
        })
    }

    /// `metric(a) − λ · translation(a)` for each feasible action.
    pub fn scores(&self, ep: &Episode<'_>, feasible: &[NodeId]) -> Result<Vec<f64>> {
        let cfg = FeatureConfig {
            sensor: *ep.instance().sensor(),
            visibility: self.visibility,
        };
        feasible
            .iter()
            .map(|&a| {
                let f = ep.features(a, &cfg)?;
                Ok(f.get(self.metric.feature()) - self.motion_penalty * f.get(Feature::TranslationDist))
            })
            .collect()
    }
}

/// Highest-scoring feasible action, lowest id on ties.
pub fn heuristic_act(policy: &HeuristicPolicy, ep: &Episode<'_>, feasible: &[NodeId]) -> Result<NodeId> {
    let scores = policy.scores(ep, feasible)?;
    argmax_first(scores)
        .map(|i| feasible[i])
        .ok_or(Error::NoFeasibleAction)
}

impl Policy for HeuristicPolicy {
    fn name(&self) -> String {
        if self.motion_penalty > 0.0 {
            format!("{}+motion", self.metric.name())
        } else {
            self.metric.name().to_string()
        }
    }

    fn act(&self, ep: &Episode<'_>, feasible: &[NodeId], _: &mut Rng) -> Result<NodeId> {
        heuristic_act(self, ep, feasible)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::belief::FEATURE_NAMES;
    use crate::sensor::SensorConfig;
    use crate::utility::{Instance, ProblemSpec};
    use crate::worldgen::{generate, GenConfig, Generator, Node, NodeSet, Split, WorldMap};

    fn node(id: usize, x: f64, y: f64) -> Node {
        Node { id, x, y, heading: 0.0 }
    }

    fn instance(w: usize, h: usize, occupied: &[usize], nodes: Vec<Node>, range: f64) -> Instance {
        let world = WorldMap::from_occupied(w, h, 1.0, occupied).unwrap();
        let nodes = NodeSet::new(nodes, 0, &world).unwrap();
        Instance::new(world, nodes, SensorConfig { max_range: range, ..Default::default() }).unwrap()
    }

    fn pick(metric: Metric, lambda: f64, ep: &Episode<'_>) -> NodeId {
        heuristic_act(&HeuristicPolicy::new(metric, lambda).unwrap(), ep, &ep.feasible()).unwrap()
    }

    #[test]
    fn fully_known_belief_picks_lowest_id() {
        // a walled 7×7 room seen entirely from its centre
        let (w, h) = (7, 7);
        let border: Vec<usize> = (0..w * h)
            .filter(|&c| c % w == 0 || c % w == w - 1 || c / w == 0 || c / w == h - 1)
            .collect();
        let inst = instance(w, h, &border, vec![node(0, 3.5, 3.5), node(1, 2.5, 2.5), node(2, 4.5, 4.5)], 12.0);
        let ep = Episode::new(&inst, ProblemSpec::unconstrained(2)).unwrap();
        for m in Metric::ALL {
            assert_eq!(pick(m, 0.0, &ep), 1, "{}", m.name());
        }
    }

    #[test]
    fn rear_side_island_and_entropy_sweep_disagree() {
        // The start node sees the front of a short wall. Node 1 stands next to
        // it, where the rear-side cells are; node 2 sits in a wide unknown area.
        let (w, h) = (40, 21);
        let wall: Vec<usize> = (7..14).map(|y| y * w + 6).collect();
        let nodes = vec![node(0, 2.5, 10.5), node(1, 4.5, 10.5), node(2, 30.5, 10.5)];
        let inst = instance(w, h, &wall, nodes, 6.0);
        let ep = Episode::new(&inst, ProblemSpec::unconstrained(2)).unwrap();
        let cfg = FeatureConfig::new(*inst.sensor());
        let (f1, f2) = (ep.features(1, &cfg).unwrap(), ep.features(2, &cfg).unwrap());
        assert!(f1.get(Feature::RearSideVoxelCount) > 0.0);
        assert_eq!(f2.get(Feature::RearSideVoxelCount), 0.0);
        assert_eq!(pick(Metric::RearSideVoxel, 0.0, &ep), 1);
        assert_eq!(pick(Metric::AverageEntropy, 0.0, &ep), 2);
    }

    #[test]
    fn motion_penalty_pulls_towards_nearby_nodes() {
        let (w, h) = (40, 21);
        let wall: Vec<usize> = (7..14).map(|y| y * w + 6).collect();
        let nodes = vec![node(0, 2.5, 10.5), node(1, 4.5, 10.5), node(2, 30.5, 10.5)];
        let inst = instance(w, h, &wall, nodes, 6.0);
        let ep = Episode::new(&inst, ProblemSpec::unconstrained(2)).unwrap();
        assert_eq!(pick(Metric::AverageEntropy, 0.0, &ep), 2);
        assert_eq!(pick(Metric::AverageEntropy, 10.0, &ep), 1);
    }

    #[test]
    fn negative_penalty_is_rejected() {
        assert!(HeuristicPolicy::new(Metric::UnknownCount, -0.1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::by_name(m.name()), Some(m));
            assert!(FEATURE_NAMES.len() > m.feature() as usize);
        }
    }

    fn random_episode_world(seed: u64) -> Instance {
        let names = ["parallel-lines", "distributed-blocks", "poisson-forest"];
        let cfg = GenConfig::new((48, 48), Generator::by_name(names[(seed % 3) as usize]).unwrap()).with_nodes(40);
        let e = generate(&cfg, 1, seed, Split::Test).unwrap().entries.remove(0);
        Instance::new(e.world, e.nodes, SensorConfig { max_range: 8.0, ..Default::default() }).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn argmax_is_scale_invariant(seed in 0u64..1000, k in -8i32..8, lambda in 0.0f64..0.2, steps in 0usize..4) {
            let inst = random_episode_world(seed);
            let mut ep = Episode::new(&inst, ProblemSpec::unconstrained(10)).unwrap();
            for _ in 0..steps {
                let a = ep.feasible()[0];
                ep.step(a).unwrap();
            }
            // powers of two scale without rounding, so ties stay ties
            let c = 2f64.powi(k);
            let feasible = ep.feasible();
            let cfg = FeatureConfig::new(*inst.sensor());
            for m in Metric::ALL {
                let chosen = pick(m, lambda, &ep);
                prop_assert!(feasible.contains(&chosen));
                let scaled: Vec<f64> = feasible
                    .iter()
                    .map(|&a| {
                        let f = ep.features(a, &cfg).unwrap();
                        c * f.get(m.feature()) - c * lambda * f.get(Feature::TranslationDist)
                    })
                    .collect();
                prop_assert_eq!(feasible[argmax_first(scaled).unwrap()], chosen);
            }
        }
    }
}
