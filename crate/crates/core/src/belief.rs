//! The robot's belief: the measurement history folded into a three-state
//! occupancy grid, and the per-action feature map read by learners and
//! heuristics.
//!
//! The sensor is deterministic, so a cell's entropy is one bit while it is
//! unknown and zero once observed. Every entropy-style metric below is
//! therefore a (possibly distance-weighted) count of unknown cells.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Traversal;
use crate::sensor::{Measurement, SensorConfig};
use crate::utility::ProblemSpec;
use crate::worldgen::{CellIndex, Node, NodeId, NodeSet, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occ {
    Unknown,
    Free,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    width: usize,
    height: usize,
    resolution: f64,
    history: Vec<(NodeId, Measurement)>,
    occ: Vec<Occ>,
    unknown: usize,
    /// Per-row prefix counts of unknown cells, `width + 1` entries per row.
    row_unknown: Vec<u32>,
}

impl Belief {
    /// An all-unknown belief over the grid of `world` (only its shape is read).
    pub fn for_world(world: &WorldMap) -> Self {
        Self::new(world.width(), world.height(), world.resolution())
    }

    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            history: Vec::new(),
            occ: vec![Occ::Unknown; width * height],
            unknown: width * height,
            row_unknown: (0..height)
                .flat_map(|_| 0..=width as u32)
                .collect(),
        }
    }

    pub fn history(&self) -> &[(NodeId, Measurement)] {
        &self.history
    }

    pub fn occ(&self) -> &[Occ] {
        &self.occ
    }

    pub fn cell(&self, c: CellIndex) -> Occ {
        self.occ[c]
    }

    pub fn unknown_count(&self) -> usize {
        self.unknown
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Cells currently believed occupied.
    pub fn covered_estimate(&self) -> Vec<CellIndex> {
        (0..self.occ.len()).filter(|&c| self.occ[c] == Occ::Occupied).collect()
    }

    /// Folds one measurement taken at `v` into the belief. Re-applying a
    /// record already in the history changes nothing. On conflict the belief
    /// is left untouched.
    pub fn update(&mut self, v: NodeId, y: Measurement) -> Result<()> {
        if self.history.iter().any(|(u, m)| *u == v && *m == y) {
            return Ok(());
        }
        let in_range = |c: &CellIndex| *c < self.occ.len();
        if !y.free_cells.iter().chain(&y.hit_cells).all(in_range) {
            return Err(Error::Format("measurement cell outside the belief grid".into()));
        }
        if let Some(&cell) = y.free_cells.iter().find(|&&c| self.occ[c] == Occ::Occupied) {
            return Err(Error::ObservationConflict { cell });
        }
        if let Some(&cell) = y.hit_cells.iter().find(|&&c| self.occ[c] == Occ::Free) {
            return Err(Error::ObservationConflict { cell });
        }
        if let Some(&cell) = y.hit_cells.iter().find(|c| y.free_cells.binary_search(c).is_ok()) {
            return Err(Error::ObservationConflict { cell });
        }
        for &c in &y.free_cells {
            if self.occ[c] == Occ::Unknown {
                self.unknown -= 1;
            }
            self.occ[c] = Occ::Free;
        }
        for &c in &y.hit_cells {
            if self.occ[c] == Occ::Unknown {
                self.unknown -= 1;
            }
            self.occ[c] = Occ::Occupied;
        }
        let rows = y.free_cells.iter().chain(&y.hit_cells).map(|&c| c / self.width);
        let (lo, hi) = rows.fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r), hi.max(r)));
        for r in lo..=hi.min(self.height.saturating_sub(1)) {
            let row = &mut self.row_unknown[r * (self.width + 1)..(r + 1) * (self.width + 1)];
            for x in 0..self.width {
                row[x + 1] = row[x] + u32::from(self.occ[r * self.width + x] == Occ::Unknown);
            }
        }
        self.history.push((v, y));
        Ok(())
    }

    /// Unknown cells whose centers lie within `radius` cells of `origin`
    /// (grid coordinates).
    fn unknown_in_disk(&self, origin: (f64, f64), radius: f64) -> usize {
        let r2 = radius * radius;
        let y_lo = (origin.1 - radius).floor().max(0.0) as usize;
        let y_hi = ((origin.1 + radius).ceil().max(0.0) as usize).min(self.height);
        let mut n = 0;
        for y in y_lo..y_hi {
            let dy = y as f64 + 0.5 - origin.1;
            let rem = r2 - dy * dy;
            if rem < 0.0 {
                continue;
            }
            // centers x + 0.5 with |x + 0.5 - ox| <= half
            let half = rem.sqrt();
            let x_lo = (origin.0 - half - 0.5).ceil().max(0.0);
            let x_hi = (origin.0 + half - 0.5).floor().min(self.width as f64 - 1.0);
            if x_hi < x_lo {
                continue;
            }
            let row = &self.row_unknown[y * (self.width + 1)..];
            n += (row[x_hi as usize + 1] - row[x_lo as usize]) as usize;
        }
        n
    }

    fn is_frontier(&self, c: CellIndex) -> bool {
        let (x, y) = (c % self.width, c / self.width);
        (x > 0 && self.occ[c - 1] == Occ::Unknown)
            || (x + 1 < self.width && self.occ[c + 1] == Occ::Unknown)
            || (y > 0 && self.occ[c - self.width] == Occ::Unknown)
            || (y + 1 < self.height && self.occ[c + self.width] == Occ::Unknown)
    }
}

/// Functional form of [`Belief::update`].
pub fn belief_update(b: &Belief, v: NodeId, y: Measurement) -> Result<Belief> {
    let mut next = b.clone();
    next.update(v, y)?;
    Ok(next)
}

/// How unknown cells interact with belief-space rays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    /// Unknown cells are transparent.
    #[default]
    Optimistic,
    /// Unknown cells stop the ray after being counted.
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub sensor: SensorConfig,
    #[serde(default)]
    pub visibility: Visibility,
}

impl FeatureConfig {
    pub fn new(sensor: SensorConfig) -> Self {
        Self {
            sensor,
            visibility: Visibility::Optimistic,
        }
    }
}

pub const FEATURE_SCHEMA_VERSION: u32 = 1;
pub const NUM_FEATURES: usize = 10;

/// Component names in vector order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "avg_entropy_gain",
    "unknown_cells_in_range",
    "rear_side_voxel_count",
    "rear_side_entropy_gain",
    "occlusion_aware_gain",
    "expected_new_surface",
    "translation_dist",
    "heading_change",
    "remaining_budget_fraction",
    "timestep_fraction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    AvgEntropyGain = 0,
    UnknownCellsInRange,
    RearSideVoxelCount,
    RearSideEntropyGain,
    OcclusionAwareGain,
    ExpectedNewSurface,
    TranslationDist,
    HeadingChange,
    RemainingBudgetFraction,
    TimestepFraction,
}

/// Names, order and version of the feature vector, stored with trained models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub fn current() -> Self {
        Self {
            version: FEATURE_SCHEMA_VERSION,
            names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn check(&self, other: &FeatureSchema) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SchemaMismatch {
                expected: format!("v{} {:?}", self.version, self.names),
                found: format!("v{} {:?}", other.version, other.names),
            })
        }
    }
}

/// Dense feature vector for one (state, belief, action) triple. Distances are
/// in meters and angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Number of leading feature components that depend only on the belief and
/// the candidate node.
pub const NUM_IG_FEATURES: usize = 6;

/// Features of moving from the end of `visited` to `action`.
///
/// Information-gain components cast the sensor's rays over the belief grid
/// from the candidate node: occupied cells block, unknown cells are counted
/// (and block only under pessimistic visibility).
pub fn extract_features(
    belief: &Belief,
    visited: &[NodeId],
    cost: f64,
    action: NodeId,
    nodes: &NodeSet,
    spec: &ProblemSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let ig = ig_features(belief, nodes.get(action)?, cfg);
    motion_features(ig, visited, cost, action, nodes, spec)
}

/// Completes the belief-only components with the motion and context ones.
pub(crate) fn motion_features(
    ig: [f64; NUM_IG_FEATURES],
    visited: &[NodeId],
    cost: f64,
    action: NodeId,
    nodes: &NodeSet,
    spec: &ProblemSpec,
) -> Result<FeatureVector> {
    let target = nodes.get(action)?;
    let current = nodes.get(*visited.last().ok_or(Error::NoFeasibleAction)?)?;
    let translation = current.distance_to(target);
    let heading_change = match visited {
        [.., prev, _] if translation > 0.0 => {
            let prev = nodes.get(*prev)?;
            let (mx, my) = (current.x - prev.x, current.y - prev.y);
            if mx == 0.0 && my == 0.0 {
                0.0
            } else {
                let last = my.atan2(mx);
                let next = (target.y - current.y).atan2(target.x - current.x);
                wrap_angle(next - last).abs()
            }
        }
        _ => 0.0,
    };
    let remaining = match spec.budget {
        Some(b) => ((b - cost) / b).max(0.0),
        None => 1.0,
    };
    let timestep = visited.len() as f64 / spec.horizon as f64;
    let mut x = [0.0; NUM_FEATURES];
    x[..NUM_IG_FEATURES].copy_from_slice(&ig);
    x[NUM_IG_FEATURES..].copy_from_slice(&[translation, heading_change, remaining, timestep]);
    Ok(FeatureVector(x))
}

/// Per-cell minimum distance, reset lazily through the touched list.
struct NearestSet {
    best: Vec<f64>,
    touched: Vec<CellIndex>,
}

impl NearestSet {
    fn reset(&mut self, len: usize) {
        for &c in &self.touched {
            self.best[c] = f64::INFINITY;
        }
        self.touched.clear();
        if self.best.len() != len {
            self.best = vec![f64::INFINITY; len];
        }
    }

    fn insert(&mut self, c: CellIndex, d: f64) {
        if self.best[c] == f64::INFINITY {
            self.touched.push(c);
        }
        if d < self.best[c] {
            self.best[c] = d;
        }
    }

    fn len(&self) -> usize {
        self.touched.len()
    }

    fn inverse_distance_sum(&self) -> f64 {
        self.touched.iter().map(|&c| 1.0 / (1.0 + self.best[c])).sum()
    }
}

struct Scratch {
    unknown: NearestSet,
    rear: NearestSet,
    surface: NearestSet,
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> = const {
        std::cell::RefCell::new(Scratch {
            unknown: NearestSet { best: Vec::new(), touched: Vec::new() },
            rear: NearestSet { best: Vec::new(), touched: Vec::new() },
            surface: NearestSet { best: Vec::new(), touched: Vec::new() },
        })
    };
}

/// The six information-gain components for a sensor placed at `target`.
pub(crate) fn ig_features(belief: &Belief, target: &Node, cfg: &FeatureConfig) -> [f64; NUM_IG_FEATURES] {
    let res = belief.resolution;
    let sensor = &cfg.sensor;
    let origin = (target.x / res, target.y / res);
    let max_t = sensor.max_range / res;
    let (w, h) = (belief.width, belief.height);

    SCRATCH.with(|scratch| {
        let scratch = &mut *scratch.borrow_mut();
        scratch.unknown.reset(w * h);
        scratch.rear.reset(w * h);
        scratch.surface.reset(w * h);
        let mut per_ray_unknown = 0usize;
        for bearing in sensor.bearings(target.heading) {
            let mut ray = Traversal::new(origin, (bearing.cos(), bearing.sin()), max_t, w, h);
            while let Some(v) = ray.next() {
                let c = v.y as usize * w + v.x as usize;
                let d = v.t_enter * res;
                match belief.occ[c] {
                    Occ::Free => {}
                    Occ::Unknown => {
                        per_ray_unknown += 1;
                        scratch.unknown.insert(c, d);
                        if cfg.visibility == Visibility::Pessimistic {
                            break;
                        }
                    }
                    Occ::Occupied => {
                        if belief.is_frontier(c) {
                            scratch.surface.insert(c, d);
                        }
                        if let Some((rx, ry)) = ray.peek_next_cell() {
                            let rc = ry as usize * w + rx as usize;
                            if belief.occ[rc] == Occ::Unknown {
                                scratch.rear.insert(rc, d);
                            }
                        }
                        break;
                    }
                }
            }
        }
        [
            per_ray_unknown as f64 / sensor.num_rays as f64,
            belief.unknown_in_disk(origin, max_t) as f64,
            scratch.rear.len() as f64,
            scratch.rear.inverse_distance_sum(),
            scratch.unknown.inverse_distance_sum(),
            scratch.surface.len() as f64,
        ]
    })
}

/// Per-component affine map `x ↦ (x − offset) / scale`, fitted once
/// (min/max of the first training batch) and then frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        for row in rows {
            if lo.is_empty() {
                lo = row.to_vec();
                hi = row.to_vec();
                continue;
            }
            for (j, &x) in row.iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        if lo.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| if b > a { b - a } else { 1.0 })
            .collect();
        Ok(Self { offset: lo, scale })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::Node;

    #[test]
    fn disk_count_matches_brute_force() {
        let mut b = Belief::new(23, 17, 1.0);
        let free: Vec<usize> = (0..b.occ.len()).filter(|c| c % 3 == 0 || c % 7 == 1).collect();
        let m = Measurement {
            node_id: 0,
            hit_cells: vec![],
            free_cells: free,
            ranges: vec![1.0],
        };
        b.update(0, m).unwrap();
        let mut rng = crate::rng::root(5);
        use rand::Rng as _;
        for _ in 0..500 {
            let o = (rng.random_range(-3.0..26.0), rng.random_range(-3.0..20.0));
            let r: f64 = rng.random_range(0.0..9.0);
            let mut brute = 0;
            for y in 0..17 {
                for x in 0..23 {
                    let (dx, dy) = (x as f64 + 0.5 - o.0, y as f64 + 0.5 - o.1);
                    if dx * dx + dy * dy <= r * r && b.occ[y * 23 + x] == Occ::Unknown {
                        brute += 1;
                    }
                }
            }
            assert_eq!(b.unknown_in_disk(o, r), brute, "origin {o:?} radius {r}");
        }
    }

    fn meas(node: NodeId, free: Vec<usize>, hit: Vec<usize>) -> Measurement {
        Measurement {
            node_id: node,
            hit_cells: hit,
            free_cells: free,
            ranges: vec![1.0],
        }
    }

    #[test]
    fn one_record_fold() {
        let mut b = Belief::new(5, 5, 1.0);
        b.update(0, meas(0, vec![0, 1, 2, 3, 4], vec![5, 6])).unwrap();
        let count = |o: Occ| b.occ().iter().filter(|&&c| c == o).count();
        assert_eq!(count(Occ::Free), 5);
        assert_eq!(count(Occ::Occupied), 2);
        assert_eq!(count(Occ::Unknown), 18);
        assert_eq!(b.unknown_count(), 18);
        assert_eq!(b.covered_estimate(), vec![5, 6]);
    }

    #[test]
    fn update_is_idempotent() {
        let m = meas(0, vec![0, 1], vec![2]);
        let once = belief_update(&Belief::new(3, 3, 1.0), 0, m.clone()).unwrap();
        let twice = belief_update(&once, 0, m).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn conflicting_records_are_rejected() {
        let b = belief_update(&Belief::new(3, 3, 1.0), 0, meas(0, vec![0, 1], vec![2])).unwrap();
        assert!(matches!(
            belief_update(&b, 1, meas(1, vec![2], vec![])),
            Err(Error::ObservationConflict { cell: 2 })
        ));
        assert!(matches!(
            belief_update(&b, 1, meas(1, vec![], vec![0])),
            Err(Error::ObservationConflict { cell: 0 })
        ));
    }

    fn line_nodes(world: &WorldMap, pts: &[(f64, f64)]) -> NodeSet {
        let nodes = pts
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Node { id, x, y, heading: 0.0 })
            .collect();
        NodeSet::new(nodes, 0, world).unwrap()
    }

    #[test]
    fn known_world_has_no_information_gain() {
        let world = WorldMap::from_occupied(9, 9, 1.0, &[40]).unwrap();
        let nodes = line_nodes(&world, &[(1.5, 1.5), (7.5, 7.5)]);
        let mut b = Belief::for_world(&world);
        let free: Vec<_> = (0..81).filter(|&c| c != 40).collect();
        b.update(0, meas(0, free, vec![40])).unwrap();
        let cfg = FeatureConfig::new(SensorConfig::default());
        let f = extract_features(&b, &[0], 0.0, 1, &nodes, &ProblemSpec::unconstrained(5), &cfg).unwrap();
        for (v, name) in f.0.iter().zip(FEATURE_NAMES).take(6) {
            assert_eq!(*v, 0.0, "{name}");
        }
    }

    #[test]
    fn motion_features_at_first_step() {
        let world = WorldMap::empty(10, 10, 1.0).unwrap();
        let nodes = line_nodes(&world, &[(1.0, 1.0), (4.0, 5.0)]);
        let b = Belief::for_world(&world);
        let cfg = FeatureConfig::new(SensorConfig::default());
        let spec = ProblemSpec::budgeted(4, 20.0);
        let f = extract_features(&b, &[0], 0.0, 1, &nodes, &spec, &cfg).unwrap();
        assert_eq!(f.get(Feature::TranslationDist), 5.0);
        assert_eq!(f.get(Feature::HeadingChange), 0.0);
        assert_eq!(f.get(Feature::RemainingBudgetFraction), 1.0);
        assert_eq!(f.get(Feature::TimestepFraction), 0.25);
    }

    #[test]
    fn heading_change_measures_the_turn() {
        let world = WorldMap::empty(10, 10, 1.0).unwrap();
        let nodes = line_nodes(&world, &[(1.0, 1.0), (4.0, 1.0), (4.0, 6.0)]);
        let b = Belief::for_world(&world);
        let cfg = FeatureConfig::new(SensorConfig::default());
        let f = extract_features(&b, &[0, 1], 3.0, 2, &nodes, &ProblemSpec::unconstrained(4), &cfg).unwrap();
        assert!((f.get(Feature::HeadingChange) - PI / 2.0).abs() < 1e-12);
    }

    /// Wall at x = 4, y = 3..=6 on a 9x9 grid. Every cell with x <= 4 is
    /// known (free except the wall); the columns behind it are unknown.
    /// A ray striking wall cell (4, y) either leaves through its east face
    /// into unknown (5, y), or through a top/bottom face into a known cell.
    /// So the rear-side set is exactly {(5, 3), (5, 4), (5, 5), (5, 6)}.
    #[test]
    fn rear_side_cells_behind_a_wall() {
        let wall = [3 * 9 + 4, 4 * 9 + 4, 5 * 9 + 4, 6 * 9 + 4];
        let world = WorldMap::from_occupied(9, 9, 1.0, &wall).unwrap();
        let nodes = line_nodes(&world, &[(1.5, 5.1), (2.5, 5.1)]);
        let mut b = Belief::for_world(&world);
        let free: Vec<_> = (0..81).filter(|c| c % 9 <= 4 && !wall.contains(c)).collect();
        b.update(0, meas(0, free, wall.to_vec())).unwrap();
        let cfg = FeatureConfig::new(SensorConfig { num_rays: 3600, ..SensorConfig::default() });
        let f = extract_features(&b, &[0], 0.0, 1, &nodes, &ProblemSpec::unconstrained(3), &cfg).unwrap();
        assert_eq!(f.get(Feature::RearSideVoxelCount), 4.0);
        assert_eq!(f.get(Feature::ExpectedNewSurface), 4.0);
        assert!(f.get(Feature::RearSideEntropyGain) > 0.0);
    }
}
