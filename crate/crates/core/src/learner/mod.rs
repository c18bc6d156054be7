//! Regression forests over feature vectors, and the policies that argmax
//! their predictions.

mod policy;
mod tree;

pub use policy::{load_policy, policy_act, save_policy, LearntPolicy, PolicyModels, MODEL_FORMAT_VERSION};
pub use tree::Tree;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{FeatureScaler, FeatureSchema, FeatureVector};
use crate::error::{Error, Result};
use crate::rng;
use tree::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionExample {
    pub features: FeatureVector,
    pub target: f64,
    /// 1-based timestep at which the action was labelled.
    pub t: usize,
    pub weight: f64,
}

impl RegressionExample {
    pub fn new(features: FeatureVector, target: f64, t: usize) -> Self {
        Self {
            features,
            target,
            t,
            weight: 1.0,
        }
    }
}

/// Append-only training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub schema: FeatureSchema,
    pub examples: Vec<RegressionExample>,
}

impl Default for RegressionDataset {
    fn default() -> Self {
        Self {
            schema: FeatureSchema::current(),
            examples: Vec::new(),
        }
    }
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Appends every example of `other`; schemas must agree.
    pub fn extend(&mut self, other: &RegressionDataset) -> Result<()> {
        self.schema.check(&other.schema)?;
        self.examples.extend_from_slice(&other.examples);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features searched per split; `None` means `√d / d`.
    pub feature_fraction: Option<f64>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            num_trees: 50,
            max_depth: Some(12),
            min_samples_leaf: 5,
            feature_fraction: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    /// Deep, unbootstrapped, single-sample leaves: reproduces the training set.
    pub fn memorize(num_trees: usize) -> Self {
        Self {
            num_trees,
            max_depth: None,
            min_samples_leaf: 1,
            feature_fraction: None,
            bootstrap: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_trees == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("forest needs ≥1 tree and min_samples_leaf ≥ 1".into()));
        }
        if let Some(f) = self.feature_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig("feature_fraction must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    fn features_per_split(&self, dim: usize) -> usize {
        let k = match self.feature_fraction {
            Some(f) => (f * dim as f64).round() as usize,
            None => (dim as f64).sqrt().round() as usize,
        };
        k.clamp(1, dim.max(1))
    }
}

/// A fitted forest: prediction is the mean of the tree outputs on the scaled
/// feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema: FeatureSchema,
    pub scaler: FeatureScaler,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

/// Fits a forest. Tree `k` draws its bootstrap sample and split features from
/// child stream `(seed, k)`, so the result does not depend on thread count.
/// When `scaler` is `None` it is fitted on `data`.
pub fn fit(
    data: &RegressionDataset,
    config: &ForestConfig,
    seed: u64,
    scaler: Option<FeatureScaler>,
) -> Result<ForestModel> {
    config.validate()?;
    FeatureSchema::current().check(&data.schema)?;
    if data.examples.len() < config.min_samples_leaf || data.examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scaler = match scaler {
        Some(s) => s,
        None => FeatureScaler::fit(data.examples.iter().map(|e| e.features.as_slice()))?,
    };
    let rows: Vec<Vec<f64>> = data
        .examples
        .iter()
        .map(|e| scaler.transform(e.features.as_slice()))
        .collect();
    let targets: Vec<f64> = data.examples.iter().map(|e| e.target).collect();
    let weights: Vec<f64> = data.examples.iter().map(|e| e.weight).collect();
    if targets.iter().chain(&weights).any(|v| !v.is_finite()) || weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidConfig("targets must be finite and weights positive".into()));
    }
    let n = rows.len();
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: config.features_per_split(rows[0].len()),
    };
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::child(seed, &[k as u64]);
            let samples = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::grow(&rows, &targets, &weights, samples, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        schema: data.schema.clone(),
        scaler,
        config: *config,
        seed,
        trees,
    })
}

impl ForestModel {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        self.predict_scaled(&self.scaler.transform(x.as_slice()))
    }

    /// Prediction on an unscaled raw row; the length must match the schema.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.schema.names.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features", self.schema.names.len()),
                found: format!("{} features", x.len()),
            });
        }
        Ok(self.predict_scaled(&self.scaler.transform(x)))
    }

    fn predict_scaled(&self, x: &[f64]) -> f64 {
        // Sorted, shifted mean: independent of tree order, and exact when
        // every tree agrees.
        let mut p: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        p.sort_by(f64::total_cmp);
        let spread: f64 = p[1..].iter().map(|v| v - p[0]).sum();
        p[0] + spread / p.len() as f64
    }

    /// Mean squared error on `data`.
    pub fn mse(&self, data: &RegressionDataset) -> f64 {
        if data.examples.is_empty() {
            return 0.0;
        }
        data.examples
            .iter()
            .map(|e| (self.predict(&e.features) - e.target).powi(2))
            .sum::<f64>()
            / data.examples.len() as f64
    }
}

/// Free-function form of [`ForestModel::predict`].
pub fn predict(model: &ForestModel, x: &FeatureVector) -> f64 {
    model.predict(x)
}
