use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{nodes::sample_nodes, Cell, Split, WorldDataset, WorldEntry, WorldMap, DEFAULT_DIMS};
use crate::error::{Error, Result};
use crate::raster::Traversal;
use crate::rng::{self, Rng};

const MIN_DIM: usize = 32;
const MAX_ATTEMPTS: u64 = 100;

/// Two parallel segments of equal length under a shared random rigid motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineParams {
    pub min_length: f64,
    pub max_length: f64,
    pub min_separation: f64,
    pub max_separation: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        Self {
            min_length: 24.0,
            max_length: 40.0,
            min_separation: 6.0,
            max_separation: 14.0,
        }
    }
}

/// Axis-aligned rectangles whose centres lie in the outer margin band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockParams {
    pub min_blocks: usize,
    pub max_blocks: usize,
    pub min_side: usize,
    pub max_side: usize,
    /// Width of the margin band as a fraction of each grid dimension.
    pub margin_fraction: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        Self {
            min_blocks: 4,
            max_blocks: 8,
            min_side: 3,
            max_side: 8,
            margin_fraction: 0.25,
        }
    }
}

impl BlockParams {
    pub fn max_half_extent(&self) -> usize {
        self.max_side / 2
    }
}

/// Disk obstacles at a Poisson-distributed number of uniform locations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    /// Expected obstacle count per grid cell.
    pub intensity: f64,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            intensity: 20.0 / 4096.0,
            min_radius: 1.0,
            max_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    ParallelLines(LineParams),
    DistributedBlocks(BlockParams),
    PoissonForest(ForestParams),
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::ParallelLines(_) => "parallel-lines",
            Generator::DistributedBlocks(_) => "distributed-blocks",
            Generator::PoissonForest(_) => "poisson-forest",
        }
    }

    /// Generator with default parameters, looked up by its CLI name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "parallel-lines" => Ok(Generator::ParallelLines(LineParams::default())),
            "distributed-blocks" => Ok(Generator::DistributedBlocks(BlockParams::default())),
            "poisson-forest" => Ok(Generator::PoissonForest(ForestParams::default())),
            other => Err(Error::InvalidConfig(format!("unknown generator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub num_nodes: usize,
    pub generator: Generator,
}

impl GenConfig {
    pub fn new(dims: (usize, usize), generator: Generator) -> Self {
        Self {
            width: dims.0,
            height: dims.1,
            resolution: 1.0,
            num_nodes: 300,
            generator,
        }
    }

    pub fn with_nodes(mut self, num_nodes: usize) -> Self {
        self.num_nodes = num_nodes;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.width < MIN_DIM || self.height < MIN_DIM {
            return Err(Error::InvalidConfig(format!(
                "grid must be at least {MIN_DIM}x{MIN_DIM}, got {}x{}",
                self.width, self.height
            )));
        }
        if self.resolution.is_nan() || self.resolution <= 0.0 {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        if self.num_nodes == 0 {
            return Err(Error::InvalidConfig("node count must be positive".into()));
        }
        match self.generator {
            Generator::ParallelLines(p) => {
                if !(p.min_length > 0.0 && p.min_length <= p.max_length)
                    || !(p.min_separation > 1.0 && p.min_separation <= p.max_separation)
                {
                    return Err(Error::InvalidConfig("bad parallel-line ranges".into()));
                }
                let fit = (self.width.min(self.height) as f64) - 2.0;
                if p.min_length > fit {
                    return Err(Error::InvalidConfig(format!(
                        "minimum line length {} cannot fit in a {}x{} grid",
                        p.min_length, self.width, self.height
                    )));
                }
            }
            Generator::DistributedBlocks(p) => {
                if p.max_blocks == 0 || p.min_blocks > p.max_blocks {
                    return Err(Error::InvalidConfig("block count range must include a positive count".into()));
                }
                if p.min_blocks == 0 {
                    return Err(Error::InvalidConfig("block count range admits all-free worlds".into()));
                }
                if p.min_side == 0 || p.min_side > p.max_side {
                    return Err(Error::InvalidConfig("bad block side range".into()));
                }
                let band = margin_cells(self.width, p.margin_fraction)
                    .min(margin_cells(self.height, p.margin_fraction));
                if !(p.margin_fraction > 0.0 && p.margin_fraction < 0.5) || band == 0 {
                    return Err(Error::InvalidConfig("degenerate margin band".into()));
                }
            }
            Generator::PoissonForest(p) => {
                if !(p.intensity > 0.0 && p.intensity.is_finite()) {
                    return Err(Error::InvalidConfig("forest intensity must be positive".into()));
                }
                if !(p.min_radius > 0.0 && p.min_radius <= p.max_radius) {
                    return Err(Error::InvalidConfig("bad obstacle radius range".into()));
                }
            }
        }
        Ok(())
    }
}

fn margin_cells(dim: usize, fraction: f64) -> usize {
    (dim as f64 * fraction).floor() as usize
}

/// Generates `count` worlds. World `i` is drawn from child stream `(seed, i,
/// attempt)`; attempts advance only when a draw produces an all-free world.
pub fn generate(cfg: &GenConfig, count: usize, seed: u64, split: Split) -> Result<WorldDataset> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::InvalidConfig("count must be positive".into()));
    }
    use rayon::prelude::*;
    let entries = (0..count)
        .into_par_iter()
        .map(|i| generate_entry(cfg, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(WorldDataset {
        entries,
        seed,
        generator_name: cfg.generator.name().to_string(),
        split,
    })
}

fn generate_entry(cfg: &GenConfig, seed: u64, index: u64) -> Result<WorldEntry> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::child(seed, &[index, attempt]);
        let cells = match cfg.generator {
            Generator::ParallelLines(p) => parallel_lines_cells(cfg.width, cfg.height, &p, &mut rng)?,
            Generator::DistributedBlocks(p) => blocks_cells(cfg.width, cfg.height, &p, &mut rng),
            Generator::PoissonForest(p) => forest_cells(cfg.width, cfg.height, &p, &mut rng).0,
        };
        if !cells.contains(&Cell::Occupied) || !cells.contains(&Cell::Free) {
            continue;
        }
        let world = WorldMap::new(cfg.width, cfg.height, cfg.resolution, cells)?;
        let nodes = sample_nodes(&world, cfg.num_nodes, rng::derive_seed(seed, &[index, attempt, 1]))?;
        return Ok(WorldEntry { world, nodes });
    }
    Err(Error::InvalidConfig(format!(
        "generator produced only degenerate worlds for index {index}"
    )))
}

pub fn gen_parallel_lines(dims: (usize, usize), count: usize, seed: u64) -> Result<WorldDataset> {
    let cfg = GenConfig::new(dims, Generator::ParallelLines(LineParams::default()));
    generate(&cfg, count, seed, Split::Train)
}

pub fn gen_distributed_blocks(dims: (usize, usize), count: usize, seed: u64) -> Result<WorldDataset> {
    let cfg = GenConfig::new(dims, Generator::DistributedBlocks(BlockParams::default()));
    generate(&cfg, count, seed, Split::Train)
}

pub fn gen_poisson_forest(
    dims: (usize, usize),
    count: usize,
    seed: u64,
    intensity: f64,
) -> Result<WorldDataset> {
    let params = ForestParams {
        intensity,
        ..ForestParams::default()
    };
    let cfg = GenConfig::new(dims, Generator::PoissonForest(params));
    generate(&cfg, count, seed, Split::Train)
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::new(DEFAULT_DIMS, Generator::ParallelLines(LineParams::default()))
    }
}

fn rasterize_segment(cells: &mut [Cell], width: usize, height: usize, a: (f64, f64), b: (f64, f64)) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    for v in Traversal::new(a, (dx / len, dy / len), len, width, height) {
        cells[v.y as usize * width + v.x as usize] = Cell::Occupied;
    }
}

fn parallel_lines_cells(width: usize, height: usize, p: &LineParams, rng: &mut Rng) -> Result<Vec<Cell>> {
    let length = rng.random_range(p.min_length..=p.max_length);
    let separation = rng.random_range(p.min_separation..=p.max_separation);
    let theta = rng.random_range(0.0..PI);
    let (c, s) = (theta.cos(), theta.sin());
    let rotate = |x: f64, y: f64| (c * x - s * y, s * x + c * y);
    let local = [
        (-length / 2.0, -separation / 2.0),
        (length / 2.0, -separation / 2.0),
        (-length / 2.0, separation / 2.0),
        (length / 2.0, separation / 2.0),
    ];
    let pts: Vec<(f64, f64)> = local.iter().map(|&(x, y)| rotate(x, y)).collect();
    let (min_x, max_x) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (min_y, max_y) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let margin = 1.0;
    let (lo_x, hi_x) = (margin - min_x, width as f64 - margin - max_x);
    let (lo_y, hi_y) = (margin - min_y, height as f64 - margin - max_y);
    if lo_x > hi_x || lo_y > hi_y {
        return Err(Error::InvalidConfig("parallel lines do not fit in the grid".into()));
    }
    let cx = rng.random_range(lo_x..=hi_x);
    let cy = rng.random_range(lo_y..=hi_y);
    let shift = |p: (f64, f64)| (p.0 + cx, p.1 + cy);
    let mut cells = vec![Cell::Free; width * height];
    rasterize_segment(&mut cells, width, height, shift(pts[0]), shift(pts[1]));
    rasterize_segment(&mut cells, width, height, shift(pts[2]), shift(pts[3]));
    Ok(cells)
}

fn in_band(x: usize, y: usize, width: usize, height: usize, mx: usize, my: usize) -> bool {
    x < mx || x >= width - mx || y < my || y >= height - my
}

fn blocks_cells(width: usize, height: usize, p: &BlockParams, rng: &mut Rng) -> Vec<Cell> {
    let mx = margin_cells(width, p.margin_fraction);
    let my = margin_cells(height, p.margin_fraction);
    let k = rng.random_range(p.min_blocks..=p.max_blocks);
    let mut cells = vec![Cell::Free; width * height];
    for _ in 0..k {
        let (cx, cy) = loop {
            let x = rng.random_range(0..width);
            let y = rng.random_range(0..height);
            if in_band(x, y, width, height, mx, my) {
                break (x, y);
            }
        };
        let bw = rng.random_range(p.min_side..=p.max_side);
        let bh = rng.random_range(p.min_side..=p.max_side);
        let x0 = cx as i64 - (bw / 2) as i64;
        let y0 = cy as i64 - (bh / 2) as i64;
        let (x1, y1) = ((x0 + bw as i64).min(width as i64), (y0 + bh as i64).min(height as i64));
        let (x0, y0) = (x0.max(0) as usize, y0.max(0) as usize);
        let (x1, y1) = (x1 as usize, y1 as usize);
        for y in y0..y1 {
            for x in x0..x1 {
                cells[y * width + x] = Cell::Occupied;
            }
        }
    }
    cells
}

fn forest_cells(width: usize, height: usize, p: &ForestParams, rng: &mut Rng) -> (Vec<Cell>, usize) {
    let mean = p.intensity * (width * height) as f64;
    let count = Poisson::new(mean)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(0);
    let mut cells = vec![Cell::Free; width * height];
    for _ in 0..count {
        let ox = rng.random_range(0.0..width as f64);
        let oy = rng.random_range(0.0..height as f64);
        let r = rng.random_range(p.min_radius..=p.max_radius);
        let x_lo = (ox - r).floor().max(0.0) as usize;
        let y_lo = (oy - r).floor().max(0.0) as usize;
        let x_hi = ((ox + r).ceil() as usize).min(width);
        let y_hi = ((oy + r).ceil() as usize).min(height);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let (dx, dy) = (x as f64 + 0.5 - ox, y as f64 + 0.5 - oy);
                if dx * dx + dy * dy <= r * r {
                    cells[y * width + x] = Cell::Occupied;
                }
            }
        }
    }
    (cells, count)
}

/// One Poisson-forest draw from `seed`, returning the grid and the number of
/// obstacles placed (before any all-free rejection).
pub fn poisson_forest_world(
    dims: (usize, usize),
    params: &ForestParams,
    seed: u64,
) -> Result<(Vec<Cell>, usize)> {
    GenConfig::new(dims, Generator::PoissonForest(*params)).validate()?;
    let mut rng = rng::root(seed);
    Ok(forest_cells(dims.0, dims.1, params, &mut rng))
}
