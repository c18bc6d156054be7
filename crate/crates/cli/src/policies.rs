//! Policy names accepted by `eval --policy`.

use std::path::Path;

use anyhow::{Context, Result};

use infogather::baselines::{HeuristicPolicy, Metric, DEFAULT_MOTION_PENALTY};
use infogather::learner::{load_policy, LearntPolicy};
use infogather::oracles::OracleKind;
use infogather::policy::{OraclePolicy, Policy, RandomPolicy};
use infogather::sensor::SensorConfig;
use infogather::utility::ProblemSpec;

use crate::config::config_error;

pub enum Loaded {
    Learnt(Box<LearntPolicy>),
    Heuristic(HeuristicPolicy),
    Oracle(OraclePolicy),
    Random(RandomPolicy),
}

impl Loaded {
    pub fn as_policy(&self) -> &dyn Policy {
        match self {
            Loaded::Learnt(p) => p.as_ref(),
            Loaded::Heuristic(p) => p,
            Loaded::Oracle(p) => p,
            Loaded::Random(p) => p,
        }
    }

    /// The sensor a learnt policy was trained with.
    pub fn sensor(&self) -> Option<SensorConfig> {
        match self {
            Loaded::Learnt(p) => Some(p.features.sensor),
            _ => None,
        }
    }
}

/// `random`, `oracle` (greedy, or GCB under a budget), `oracle-greedy`,
/// `oracle-gcb`, `<metric>`, `<metric>+motion`, `<metric>+motion=<λ>`, or a
/// path to a model file.
pub fn parse(spec_str: &str, spec: &ProblemSpec) -> Result<Loaded> {
    match spec_str {
        "random" => return Ok(Loaded::Random(RandomPolicy)),
        "oracle" => return Ok(Loaded::Oracle(OraclePolicy(OracleKind::for_spec(spec)))),
        "oracle-greedy" => return Ok(Loaded::Oracle(OraclePolicy(OracleKind::Greedy))),
        "oracle-gcb" => return Ok(Loaded::Oracle(OraclePolicy(OracleKind::Gcb))),
        _ => {}
    }
    let (metric, motion) = match spec_str.split_once('+') {
        Some((m, rest)) => (m, Some(rest)),
        None => (spec_str, None),
    };
    if let Some(metric) = Metric::by_name(metric) {
        let lambda = match motion {
            None => 0.0,
            Some("motion") => DEFAULT_MOTION_PENALTY,
            Some(rest) => rest
                .strip_prefix("motion=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| config_error(format!("bad motion penalty in '{spec_str}'")))?,
        };
        return Ok(Loaded::Heuristic(HeuristicPolicy::new(metric, lambda)?));
    }
    let path = Path::new(spec_str);
    let looks_like_path = path.extension().is_some() || spec_str.contains(std::path::MAIN_SEPARATOR);
    if !looks_like_path {
        return Err(config_error(format!(
            "unknown policy '{spec_str}': expected a model file, random, oracle[-greedy|-gcb] or one of {}",
            Metric::ALL.map(|m| m.name()).join(", ")
        )));
    }
    let policy = load_policy(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(Loaded::Learnt(Box::new(policy)))
}

/// A directory-safe version of a policy name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.+=".contains(c) { c } else { '_' })
        .collect()
}
