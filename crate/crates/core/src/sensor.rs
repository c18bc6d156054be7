//! Deterministic 2D laser: ray casting from a node over the hidden world.
//!
//! With the default omnidirectional field of view the node heading has no
//! effect on the measurement.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Traversal;
use crate::worldgen::{CellIndex, Node, NodeId, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub num_rays: usize,
    /// Field of view in radians, centred on the node heading.
    pub fov: f64,
    /// Maximum range in meters.
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            num_rays: 128,
            fov: TAU,
            max_range: 12.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rays == 0 {
            return Err(Error::InvalidConfig("sensor needs at least one ray".into()));
        }
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return Err(Error::InvalidConfig(format!("sensor fov {} outside (0, 2π]", self.fov)));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::InvalidConfig("sensor range must be positive".into()));
        }
        Ok(())
    }

    /// Ray bearings, evenly spanning the field of view around `heading`.
    pub fn bearings(&self, heading: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.num_rays;
        let full = (self.fov - TAU).abs() < 1e-12;
        (0..n).map(move |i| {
            if full {
                heading + TAU * i as f64 / n as f64
            } else if n == 1 {
                heading
            } else {
                heading - self.fov / 2.0 + self.fov * i as f64 / (n - 1) as f64
            }
        })
    }
}

/// What a node observes: the obstacle cells struck and the free cells swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub node_id: NodeId,
    /// Sorted, unique.
    pub hit_cells: Vec<CellIndex>,
    /// Sorted, unique. Includes the node's own cell.
    pub free_cells: Vec<CellIndex>,
    /// Per-ray distance in meters (`max_range` when nothing was hit).
    pub ranges: Vec<f64>,
}

/// Casts every ray of `cfg` from `node` over `world`.
pub fn raycast(world: &WorldMap, node: &Node, cfg: &SensorConfig) -> Result<Measurement> {
    cfg.validate()?;
    match world.cell_at(node.x, node.y) {
        Some(c) if !world.is_occupied(c) => {}
        _ => return Err(Error::NodeInsideObstacle { node: node.id }),
    }
    let res = world.resolution();
    let origin = (node.x / res, node.y / res);
    let max_t = cfg.max_range / res;
    let (w, h) = (world.width(), world.height());
    let mut hit_cells = Vec::new();
    let mut free_cells = Vec::new();
    let mut ranges = Vec::with_capacity(cfg.num_rays);
    for bearing in cfg.bearings(node.heading) {
        let dir = (bearing.cos(), bearing.sin());
        let mut range = cfg.max_range;
        for v in Traversal::new(origin, dir, max_t, w, h) {
            let idx = v.y as usize * w + v.x as usize;
            if world.is_occupied(idx) {
                hit_cells.push(idx);
                range = v.t_enter * res;
                break;
            }
            free_cells.push(idx);
        }
        ranges.push(range);
    }
    hit_cells.sort_unstable();
    hit_cells.dedup();
    free_cells.sort_unstable();
    free_cells.dedup();
    Ok(Measurement {
        node_id: node.id,
        hit_cells,
        free_cells,
        ranges,
    })
}

/// The cells one ray passes through, in order, from the cell holding
/// `(x, y)` up to and including the first obstacle. Coordinates in meters.
pub fn trace_ray(world: &WorldMap, x: f64, y: f64, bearing: f64, max_range: f64) -> Vec<CellIndex> {
    let res = world.resolution();
    let w = world.width();
    let mut cells = Vec::new();
    for v in Traversal::new((x / res, y / res), (bearing.cos(), bearing.sin()), max_range / res, w, world.height()) {
        let idx = v.y as usize * w + v.x as usize;
        cells.push(idx);
        if world.is_occupied(idx) {
            break;
        }
    }
    cells
}

/// The obstacle cells covered by a measurement at `node`.
pub fn visible_surface(world: &WorldMap, node: &Node, cfg: &SensorConfig) -> Result<Vec<CellIndex>> {
    raycast(world, node, cfg).map(|m| m.hit_cells)
}
