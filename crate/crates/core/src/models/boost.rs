//! Gradient boosting: first-order residual fitting (GBM) and second-order
//! regularized boosting with -G/(H+lambda) leaf weights (XGB-style).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{derive_seed, Seed};

use super::tree::{fit_tree_on, Criterion, DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub base_score: f64,
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub n_features: usize,
}

/// F_0 = mean(y); each round fits an SSE tree to the residuals and adds it
/// scaled by the learning rate.
pub fn fit_gbm(x: &[Vec<f64>], y: &[f64], config: GbmConfig, seed: Seed) -> Result<GbmModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("fit_gbm requires n >= 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    let base_score = y.iter().sum::<f64>() / n as f64;
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: None,
    };
    let indices: Vec<usize> = (0..n).collect();
    let mut predictions = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    for round in 0..config.n_rounds {
        let residuals: Vec<f64> = y
            .iter()
            .zip(&predictions)
            .map(|(yi, pi)| yi - pi)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "round", round as u64).0);
        let tree = fit_tree_on(x, Criterion::Sse { y: &residuals }, &indices, &params, &mut rng)?;
        for (i, row) in x.iter().enumerate() {
            predictions[i] += config.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        base_score,
        trees,
        learning_rate: config.learning_rate,
        n_rounds: config.n_rounds,
        n_features: x[0].len(),
    })
}

impl GbmModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum::<f64>()
    }

    /// Training MSE after each round, recomputed from the stored trees.
    pub fn training_mse_trace(&self, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mut preds = vec![self.base_score; x.len()];
        let mut trace = Vec::with_capacity(self.trees.len());
        for tree in &self.trees {
            for (i, row) in x.iter().enumerate() {
                preds[i] += self.learning_rate * tree.predict_row(row);
            }
            let mse = y
                .iter()
                .zip(&preds)
                .map(|(yi, pi)| (yi - pi).powi(2))
                .sum::<f64>()
                / n;
            trace.push(mse);
        }
        trace
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XgbConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
}

impl Default for XgbConfig {
    fn default() -> Self {
        XgbConfig {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 1,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XgbModel {
    pub base_score: f64,
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub lambda: f64,
    pub n_features: usize,
}

/// Squared loss second-order boosting: g_i = yhat_i - y_i, h_i = 1. Leaves
/// carry w = -G/(H+lambda); splits are taken only when the second-order gain
/// is positive.
pub fn fit_xgb(x: &[Vec<f64>], y: &[f64], config: XgbConfig, seed: Seed) -> Result<XgbModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("fit_xgb requires n >= 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if config.lambda < 0.0 {
        return Err(Error::invalid("lambda", "must be >= 0"));
    }
    let n = x.len();
    let base_score = y.iter().sum::<f64>() / n as f64;
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: None,
    };
    let indices: Vec<usize> = (0..n).collect();
    let h = vec![1.0; n];
    let mut predictions = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    for round in 0..config.n_rounds {
        let g: Vec<f64> = predictions.iter().zip(y).map(|(pi, yi)| pi - yi).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "round", round as u64).0);
        let tree = fit_tree_on(
            x,
            Criterion::GradHess {
                g: &g,
                h: &h,
                lambda: config.lambda,
            },
            &indices,
            &params,
            &mut rng,
        )?;
        for (i, row) in x.iter().enumerate() {
            predictions[i] += config.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(XgbModel {
        base_score,
        trees,
        learning_rate: config.learning_rate,
        n_rounds: config.n_rounds,
        lambda: config.lambda,
        n_features: x[0].len(),
    })
}

impl XgbModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum::<f64>()
    }
}
