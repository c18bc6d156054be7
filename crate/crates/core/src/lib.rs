//! Learning adaptive information-gathering policies by imitating clairvoyant
//! oracles on simulated 2D exploration problems.
//!
//! The crate is organised along the pipeline:
//!
//! * [`worldgen`]: world-map distributions, node sets, dataset files
//! * [`sensor`]: the deterministic ray-casting measurement model
//! * [`utility`]: coverage utility, rewards, travel cost, feasible actions
//! * [`belief`]: occupancy belief and the feature map
//! * [`oracles`]: clairvoyant greedy / cost-benefit oracles and value-to-go
//! * [`baselines`]: information-gain heuristics
//! * [`learner`]: regression forests and learnt policies
//! * [`training`]: forward training and dataset aggregation
//! * [`eval`]: rollouts and summary statistics
//! * [`reference`]: exhaustive oracles on tiny enumerable instances
//! * [`verify`]: seeded property suites built on the reference oracles

pub mod baselines;
pub mod belief;
pub mod error;
pub mod eval;
pub mod learner;
pub mod oracles;
pub mod policy;
mod raster;
pub mod reference;
pub mod rng;
pub mod sensor;
pub mod training;
pub mod utility;
pub mod verify;
pub mod worldgen;

pub use error::{Error, Result};
