//! Regressors: CART substrate, random forest, two gradient boosters, an MLP,
//! and the stacked ensemble, plus gain importance and JSON serialization.

pub mod boost;
pub mod forest;
pub mod mlp;
pub mod stacked;
pub mod tree;

pub use boost::{fit_gbm, fit_xgb, GbmConfig, GbmModel, XgbConfig, XgbModel};
pub use forest::{fit_random_forest, FeatureSubset, ForestConfig, ForestModel};
pub use mlp::{fit_mlp, MlpConfig, MlpGradient, MlpModel};
pub use stacked::{fit_stacked, ridge_regression, StackedConfig, StackedModel};
pub use tree::{DecisionTree, Node, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTransform;
use crate::types::Seed;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Configuration for any single base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Forest(ForestConfig),
    Gbm(GbmConfig),
    Xgb(XgbConfig),
    Mlp(MlpConfig),
    Stacked(StackedConfig),
}

impl ModelSpec {
    pub fn fit(&self, x: &[Vec<f64>], y: &[f64], seed: Seed) -> Result<Model> {
        Ok(match self {
            ModelSpec::Forest(c) => Model::Forest(fit_random_forest(x, y, *c, seed)?),
            ModelSpec::Gbm(c) => Model::Gbm(fit_gbm(x, y, *c, seed)?),
            ModelSpec::Xgb(c) => Model::Xgb(fit_xgb(x, y, *c, seed)?),
            ModelSpec::Mlp(c) => Model::Mlp(fit_mlp(x, y, *c, seed)?),
            ModelSpec::Stacked(c) => Model::Stacked(fit_stacked(x, y, c.clone(), seed)?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Gbm(_) => "gbm",
            ModelSpec::Xgb(_) => "xgb",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Stacked(_) => "stacked",
        }
    }
}

/// Any fitted model, uniform prediction surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Forest(ForestModel),
    Gbm(GbmModel),
    Xgb(XgbModel),
    Mlp(MlpModel),
    Stacked(StackedModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Forest(_) => "forest",
            Model::Gbm(_) => "gbm",
            Model::Xgb(_) => "xgb",
            Model::Mlp(_) => "mlp",
            Model::Stacked(_) => "stacked",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features,
            Model::Gbm(m) => m.n_features,
            Model::Xgb(m) => m.n_features,
            Model::Mlp(m) => m.n_features,
            Model::Stacked(m) => m.n_features,
        }
    }

    /// Deterministic, pure prediction. Row width must equal training width.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let expected = self.n_features();
        for row in rows {
            if row.len() != expected {
                return Err(Error::WidthMismatch {
                    expected,
                    actual: row.len(),
                });
            }
        }
        rows.iter()
            .map(|row| match self {
                Model::Forest(m) => Ok(m.predict_row(row)),
                Model::Gbm(m) => Ok(m.predict_row(row)),
                Model::Xgb(m) => Ok(m.predict_row(row)),
                Model::Mlp(m) => Ok(m.predict_row(row)),
                Model::Stacked(m) => m.predict_row(row),
            })
            .collect()
    }
}

/// Normalized per-feature gain shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub shares: Vec<(String, f64)>,
}

impl ImportanceTable {
    /// Sorted descending by share; ties by name for determinism.
    pub fn sorted_desc(&self) -> Vec<(String, f64)> {
        let mut out = self.shares.clone();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn share_of(&self, name: &str) -> Option<f64> {
        self.shares.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

/// Per-feature sum of recorded split gains across all trees, normalized to
/// shares summing to 1. A model with no splits yields an empty table.
pub fn gain_importance(model: &Model, feature_names: &[String]) -> Result<ImportanceTable> {
    let trees: &[DecisionTree] = match model {
        Model::Forest(m) => &m.trees,
        Model::Gbm(m) => &m.trees,
        Model::Xgb(m) => &m.trees,
        _ => {
            return Err(Error::Config(
                "importance requires a tree ensemble (forest, gbm, or xgb)".into(),
            ))
        }
    };
    if feature_names.len() != model.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            actual: feature_names.len(),
        });
    }
    let mut gains = vec![0.0; feature_names.len()];
    for tree in trees {
        tree.add_gains(&mut gains);
    }
    let total: f64 = gains.iter().sum();
    if total <= 0.0 {
        return Ok(ImportanceTable { shares: Vec::new() });
    }
    Ok(ImportanceTable {
        shares: feature_names
            .iter()
            .cloned()
            .zip(gains.iter().map(|g| g / total))
            .collect(),
    })
}

/// On-disk model document. `transform` carries the training-time feature
/// standardization so prediction never needs the training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub kind: String,
    pub feature_names: Vec<String>,
    pub payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<FeatureTransform>,
}

pub fn save_model(
    model: &Model,
    feature_names: &[String],
    transform: Option<&FeatureTransform>,
) -> Result<String> {
    let payload = match model {
        Model::Forest(m) => serde_json::to_value(m)?,
        Model::Gbm(m) => serde_json::to_value(m)?,
        Model::Xgb(m) => serde_json::to_value(m)?,
        Model::Mlp(m) => serde_json::to_value(m)?,
        Model::Stacked(m) => serde_json::to_value(m)?,
    };
    let doc = ModelDocument {
        schema_version: MODEL_SCHEMA_VERSION,
        kind: model.kind().to_string(),
        feature_names: feature_names.to_vec(),
        payload,
        transform: transform.cloned(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn load_document(json: &str) -> Result<ModelDocument> {
    let doc: ModelDocument = serde_json::from_str(json)?;
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::SchemaVersion(doc.schema_version));
    }
    Ok(doc)
}

pub fn model_from_document(doc: &ModelDocument) -> Result<Model> {
    let payload = doc.payload.clone();
    Ok(match doc.kind.as_str() {
        "forest" => Model::Forest(serde_json::from_value(payload)?),
        "gbm" => Model::Gbm(serde_json::from_value(payload)?),
        "xgb" => Model::Xgb(serde_json::from_value(payload)?),
        "mlp" => Model::Mlp(serde_json::from_value(payload)?),
        "stacked" => Model::Stacked(serde_json::from_value(payload)?),
        other => return Err(Error::UnknownKind(other.to_string())),
    })
}

pub fn load_model(json: &str) -> Result<(Model, ModelDocument)> {
    let doc = load_document(json)?;
    let model = model_from_document(&doc)?;
    Ok((model, doc))
}

/// Load and require a specific kind; cross-model confusion is an error.
pub fn load_model_expecting(json: &str, kind: &str) -> Result<(Model, ModelDocument)> {
    let doc = load_document(json)?;
    if doc.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind.to_string(),
            actual: doc.kind.clone(),
        });
    }
    let model = model_from_document(&doc)?;
    Ok((model, doc))
}
