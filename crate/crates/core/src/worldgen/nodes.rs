use std::f64::consts::TAU;

use rand::seq::index;
use rand::Rng as _;

use super::{Node, NodeSet, WorldMap};
use crate::error::{Error, Result};
use crate::rng;

/// Attempts per requested node before rejection sampling gives up.
const RETRY_FACTOR: usize = 1000;

/// Samples `n` nodes uniformly over the free space of `world`.
///
/// Positions are drawn by rejection over the whole grid. When `n` is a large
/// fraction of the free cells (more than a quarter) the sampler switches to
/// choosing `n` distinct free cells without replacement and a uniform point
/// inside each. The start node is the node nearest the grid centre, lowest id
/// on ties.
pub fn sample_nodes(world: &WorldMap, n: usize, seed: u64) -> Result<NodeSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("node count must be positive".into()));
    }
    let free: Vec<usize> = (0..world.len()).filter(|&i| !world.is_occupied(i)).collect();
    if free.len() < n {
        return Err(Error::InsufficientFreeSpace {
            needed: n,
            available: free.len(),
        });
    }
    let mut rng = rng::root(seed);
    let res = world.resolution();
    let mut nodes = Vec::with_capacity(n);
    if n * 4 > free.len() {
        for pick in index::sample(&mut rng, free.len(), n).into_iter() {
            let (cx, cy) = world.coords(free[pick]);
            let x = (cx as f64 + rng.random::<f64>()) * res;
            let y = (cy as f64 + rng.random::<f64>()) * res;
            let heading = rng.random_range(0.0..TAU);
            nodes.push(Node { id: nodes.len(), x, y, heading });
        }
    } else {
        let (w, h) = (world.width() as f64 * res, world.height() as f64 * res);
        let mut attempts = 0;
        while nodes.len() < n {
            attempts += 1;
            if attempts > RETRY_FACTOR * n {
                return Err(Error::InsufficientFreeSpace {
                    needed: n,
                    available: free.len(),
                });
            }
            let x = rng.random_range(0.0..w);
            let y = rng.random_range(0.0..h);
            match world.cell_at(x, y) {
                Some(c) if !world.is_occupied(c) => {
                    let heading = rng.random_range(0.0..TAU);
                    nodes.push(Node { id: nodes.len(), x, y, heading });
                }
                _ => {}
            }
        }
    }
    let (cx, cy) = world.center();
    let start_id = nodes
        .iter()
        .map(|nd| (nd.id, (nd.x - cx).hypot(nd.y - cy)))
        .fold((0, f64::INFINITY), |best, (id, d)| if d < best.1 { (id, d) } else { best })
        .0;
    NodeSet::new(nodes, start_id, world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::gen_distributed_blocks;

    #[test]
    fn three_hundred_nodes_in_free_space() {
        let ds = gen_distributed_blocks((64, 64), 2, 5).unwrap();
        let world = &ds.entries[0].world;
        let nodes = sample_nodes(world, 300, 9).unwrap();
        assert_eq!(nodes.len(), 300);
        for n in nodes.nodes() {
            assert!(!world.is_occupied(world.cell_at(n.x, n.y).unwrap()));
            assert!((0.0..TAU).contains(&n.heading));
        }
    }

    #[test]
    fn dense_request_hits_every_free_cell_once() {
        let world = WorldMap::from_occupied(3, 3, 1.0, &[0, 4]).unwrap();
        let nodes = sample_nodes(&world, 7, 1).unwrap();
        let mut cells: Vec<_> = nodes
            .nodes()
            .iter()
            .map(|n| world.cell_at(n.x, n.y).unwrap())
            .collect();
        cells.sort();
        assert_eq!(cells, vec![1, 2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn start_is_nearest_to_centre() {
        let world = WorldMap::empty(40, 40, 1.0).unwrap();
        let nodes = sample_nodes(&world, 50, 3).unwrap();
        let (cx, cy) = world.center();
        let d = |n: &Node| (n.x - cx).hypot(n.y - cy);
        let best = nodes.nodes().iter().map(d).fold(f64::INFINITY, f64::min);
        assert_eq!(d(nodes.start()), best);
    }

    #[test]
    fn full_world_has_no_room() {
        // a single free cell cannot hold two nodes
        let occ: Vec<_> = (1..16).collect();
        let world = WorldMap::from_occupied(4, 4, 1.0, &occ).unwrap();
        assert!(matches!(
            sample_nodes(&world, 2, 0),
            Err(Error::InsufficientFreeSpace { needed: 2, available: 1 })
        ));
    }
}
