//! World-map distributions, candidate node sets and their on-disk datasets.

mod generators;
mod io;
mod nodes;

pub use generators::{
    gen_distributed_blocks, gen_parallel_lines, gen_poisson_forest, generate, poisson_forest_world,
    BlockParams, ForestParams, GenConfig, Generator, LineParams,
};
pub use io::{load_dataset, save_dataset, CellEncoding, FORMAT_VERSION};
pub use nodes::sample_nodes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CellIndex = usize;
pub type NodeId = usize;

/// Default grid edge length in cells.
pub const DEFAULT_DIMS: (usize, usize) = (64, 64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
}

/// A 2D binary occupancy grid, row-major (`index = y * width + x`).
///
/// Cell `(x, y)` spans `[x, x + 1) × [y, y + 1)` in cell units; metric
/// coordinates are cell coordinates multiplied by `resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Cell>,
    surface_cells: Vec<CellIndex>,
}

impl WorldMap {
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<Cell>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if !cells.contains(&Cell::Free) {
            return Err(Error::InsufficientFreeSpace {
                needed: 1,
                available: 0,
            });
        }
        let mut world = Self {
            width,
            height,
            resolution,
            cells,
            surface_cells: Vec::new(),
        };
        world.surface_cells = world.compute_surface();
        Ok(world)
    }

    /// Builds a world from a list of occupied cell indices.
    pub fn from_occupied(
        width: usize,
        height: usize,
        resolution: f64,
        occupied: &[CellIndex],
    ) -> Result<Self> {
        let mut cells = vec![Cell::Free; width * height];
        for &i in occupied {
            let slot = cells
                .get_mut(i)
                .ok_or_else(|| Error::Format(format!("occupied cell {i} out of range")))?;
            *slot = Cell::Occupied;
        }
        Self::new(width, height, resolution, cells)
    }

    /// An obstacle-free world.
    pub fn empty(width: usize, height: usize, resolution: f64) -> Result<Self> {
        Self::new(width, height, resolution, vec![Cell::Free; width * height])
    }

    fn compute_surface(&self) -> Vec<CellIndex> {
        (0..self.cells.len())
            .filter(|&i| {
                self.cells[i] == Cell::Occupied
                    && self
                        .neighbors4(i)
                        .any(|n| self.cells[n] == Cell::Free)
            })
            .collect()
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

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, index: CellIndex) -> Cell {
        self.cells[index]
    }

    pub fn is_occupied(&self, index: CellIndex) -> bool {
        self.cells[index] == Cell::Occupied
    }

    /// Occupied cells with at least one free 4-neighbour, sorted.
    pub fn surface_cells(&self) -> &[CellIndex] {
        &self.surface_cells
    }

    pub fn occupied_cells(&self) -> Vec<CellIndex> {
        (0..self.cells.len()).filter(|&i| self.is_occupied(i)).collect()
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Free).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.len() - self.free_count()
    }

    pub fn index(&self, x: usize, y: usize) -> CellIndex {
        y * self.width + x
    }

    pub fn coords(&self, index: CellIndex) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// The cell containing a metric point, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<CellIndex> {
        let cx = (x / self.resolution).floor();
        let cy = (y / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some(self.index(cx as usize, cy as usize))
    }

    pub fn neighbors4(&self, index: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (x, y) = self.coords(index);
        let (w, h) = (self.width, self.height);
        [
            (x > 0).then(|| index - 1),
            (x + 1 < w).then(|| index + 1),
            (y > 0).then(|| index - w),
            (y + 1 < h).then(|| index + w),
        ]
        .into_iter()
        .flatten()
    }

    /// Metric coordinates of the grid centre.
    pub fn center(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution / 2.0,
            self.height as f64 * self.resolution / 2.0,
        )
    }

    /// Counter-clockwise quarter turn. Cell `(x, y)` moves to `(h - 1 - y, x)`
    /// and the new grid is `height × width`.
    pub fn rotate90(&self) -> WorldMap {
        let (w, h) = (self.width, self.height);
        let mut cells = vec![Cell::Free; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (h - 1 - y, x);
                cells[ny * h + nx] = self.cells[y * w + x];
            }
        }
        WorldMap::new(h, w, self.resolution, cells).expect("rotation preserves invariants")
    }
}

/// A candidate sensing location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Node {
    pub fn distance_to(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The candidate node set `V` with its distinguished start node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<Node>,
    start_id: NodeId,
}

impl NodeSet {
    pub fn new(nodes: Vec<Node>, start_id: NodeId, world: &WorldMap) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidConfig("node set is empty".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidConfig(format!("node ids must be 0..n, found {} at {i}", n.id)));
            }
            match world.cell_at(n.x, n.y) {
                Some(c) if !world.is_occupied(c) => {}
                _ => return Err(Error::NodeInsideObstacle { node: i }),
            }
        }
        if start_id >= nodes.len() {
            return Err(Error::UnknownNode(start_id));
        }
        Ok(Self { nodes, start_id })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn get(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start_id(&self) -> NodeId {
        self.start_id
    }

    pub fn start(&self) -> &Node {
        &self.nodes[self.start_id]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Validation => "validation",
        }
    }

    pub fn stream_index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
            Split::Validation => 2,
        }
    }

    /// The generation seed of this split under a shared base seed, so that
    /// splits drawn from one base seed never share worlds.
    pub fn seed(self, base: u64) -> u64 {
        crate::rng::derive_seed(base, &[self.stream_index()])
    }

    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Validation];
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "validation" | "val" => Ok(Split::Validation),
            other => Err(Error::InvalidConfig(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldEntry {
    pub world: WorldMap,
    pub nodes: NodeSet,
}

/// A labelled collection of (world, node set) pairs drawn from one generator.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldDataset {
    pub entries: Vec<WorldEntry>,
    pub seed: u64,
    pub generator_name: String,
    pub split: Split,
}

impl WorldDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks every world/node invariant; used after loading foreign files.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Format("dataset has no entries".into()));
        }
        let (w, h) = (self.entries[0].world.width(), self.entries[0].world.height());
        for e in &self.entries {
            if e.world.width() != w || e.world.height() != h {
                return Err(Error::Format("worlds have mixed dimensions".into()));
            }
            NodeSet::new(e.nodes.nodes.clone(), e.nodes.start_id, &e.world)?;
        }
        Ok(())
    }
}
