use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ForestModel;
use crate::belief::{FeatureConfig, FeatureSchema};
use crate::error::{Error, Result};
use crate::policy::{argmax_first, Episode, Policy};
use crate::rng::Rng;
use crate::worldgen::NodeId;

/// Model file version, `major.minor`; readers accept the same major.
pub const MODEL_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "models", rename_all = "kebab-case")]
pub enum PolicyModels {
    /// One model for every timestep.
    Stationary(ForestModel),
    /// Model `t - 1` acts at timestep `t`.
    NonStationary(Vec<ForestModel>),
}

/// Greedy policy over a learnt action-value model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearntPolicy {
    pub format_version: String,
    pub name: String,
    pub schema: FeatureSchema,
    pub features: FeatureConfig,
    pub models: PolicyModels,
}

impl LearntPolicy {
    pub fn stationary(name: &str, features: FeatureConfig, model: ForestModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION.into(),
            name: name.into(),
            schema: FeatureSchema::current(),
            features,
            models: PolicyModels::Stationary(model),
        }
    }

    pub fn non_stationary(name: &str, features: FeatureConfig, models: Vec<ForestModel>) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION.into(),
            name: name.into(),
            schema: FeatureSchema::current(),
            features,
            models: PolicyModels::NonStationary(models),
        }
    }

    /// The model acting at 1-based timestep `t`.
    pub fn model_at(&self, t: usize) -> &ForestModel {
        match &self.models {
            PolicyModels::Stationary(m) => m,
            PolicyModels::NonStationary(ms) => &ms[(t.max(1) - 1).min(ms.len() - 1)],
        }
    }

    /// Predicted value of each feasible action at the episode's next step.
    pub fn scores(&self, ep: &Episode<'_>, feasible: &[NodeId]) -> Result<Vec<f64>> {
        let model = self.model_at(ep.t() + 1);
        feasible
            .iter()
            .map(|&a| Ok(model.predict(&ep.features(a, &self.features)?)))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        FeatureSchema::current().check(&self.schema)?;
        let models: Vec<&ForestModel> = match &self.models {
            PolicyModels::Stationary(m) => vec![m],
            PolicyModels::NonStationary(ms) if ms.is_empty() => {
                return Err(Error::Format("non-stationary policy without models".into()))
            }
            PolicyModels::NonStationary(ms) => ms.iter().collect(),
        };
        for m in models {
            self.schema.check(&m.schema)?;
            if m.trees.is_empty() {
                return Err(Error::Format("model has no trees".into()));
            }
            for t in &m.trees {
                let n = t.feature.len();
                let ok = n > 0
                    && [t.threshold.len(), t.left.len(), t.right.len(), t.value.len(), t.count.len()]
                        .iter()
                        .all(|&l| l == n)
                    && (0..n).all(|i| {
                        t.feature[i] < 0
                            || ((t.feature[i] as usize) < self.schema.names.len()
                                && (t.left[i] as usize) < n
                                && (t.right[i] as usize) < n
                                && t.left[i] as usize > i
                                && t.right[i] as usize > i)
                    });
                if !ok {
                    return Err(Error::Format("malformed tree arrays".into()));
                }
            }
        }
        Ok(())
    }
}

/// Highest predicted value among `feasible`, lowest id on ties.
pub fn policy_act(policy: &LearntPolicy, ep: &Episode<'_>, feasible: &[NodeId]) -> Result<NodeId> {
    let scores = policy.scores(ep, feasible)?;
    argmax_first(scores)
        .map(|i| feasible[i])
        .ok_or(Error::NoFeasibleAction)
}

impl Policy for LearntPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn act(&self, ep: &Episode<'_>, feasible: &[NodeId], _: &mut Rng) -> Result<NodeId> {
        policy_act(self, ep, feasible)
    }
}

pub fn save_policy(policy: &LearntPolicy, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec(policy)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<LearntPolicy> {
    let bytes = fs::read(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Format("missing format_version".into()))?;
    if version.split('.').next() != MODEL_FORMAT_VERSION.split('.').next() {
        return Err(Error::FormatVersion {
            found: version.into(),
            supported: MODEL_FORMAT_VERSION.into(),
        });
    }
    let policy: LearntPolicy = serde_json::from_value(value)?;
    policy.validate()?;
    Ok(policy)
}
