//! Random forest regressor: bootstrap-resampled SSE trees, mean prediction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{derive_seed, Seed};

use super::tree::{fit_tree_on, Criterion, DecisionTree, TreeParams};

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// max(1, p/3), the regression convention.
    Third,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub features_per_split: FeatureSubset,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 10,
            min_samples_leaf: 1,
            bootstrap: true,
            features_per_split: FeatureSubset::Third,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub seed: Seed,
    pub n_features: usize,
}

/// Each tree fits a bootstrap resample (n draws with replacement) with its
/// own derived RNG stream, so the result is identical for any thread count.
pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[f64],
    config: ForestConfig,
    seed: Seed,
) -> Result<ForestModel> {
    if x.len() < 2 {
        return Err(Error::EmptyInput("fit_random_forest requires n >= 2".into()));
    }
    if x.len() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    let p = x[0].len();
    let features_per_split = match config.features_per_split {
        FeatureSubset::All => None,
        FeatureSubset::Third => Some((p / 3).max(1)),
        FeatureSubset::Count(k) => Some(k.clamp(1, p)),
    };
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split,
    };
    let trees: Vec<DecisionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "tree", t as u64).0);
            let indices: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, Criterion::Sse { y }, &indices, &params, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(ForestModel {
        trees,
        config,
        seed,
        n_features: p,
    })
}

impl ForestModel {
    /// Arithmetic mean of the trees' predictions.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}
