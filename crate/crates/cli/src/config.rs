//! Run configuration: one JSON file describing inputs, model, protocol,
//! seed, and output directory. Unknown keys are fatal.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use stormloss::ingest::{BundlePaths, SyntheticParams};
use stormloss::models::{
    ForestConfig, GbmConfig, MlpConfig, ModelSpec, StackedConfig, XgbConfig,
};

use crate::CliError;

pub const MODEL_KINDS: &str = "forest, gbm, xgb, mlp, stacked";

/// Model kind plus hyperparameter overrides; omitted fields keep their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Forest(ForestConfig),
    Gbm(GbmConfig),
    Xgb(XgbConfig),
    Mlp(MlpConfig),
    Stacked(StackedConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Gbm(GbmConfig::default())
    }
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        match self {
            ModelConfig::Forest(c) => ModelSpec::Forest(c.clone()),
            ModelConfig::Gbm(c) => ModelSpec::Gbm(c.clone()),
            ModelConfig::Xgb(c) => ModelSpec::Xgb(c.clone()),
            ModelConfig::Mlp(c) => ModelSpec::Mlp(c.clone()),
            ModelConfig::Stacked(c) => ModelSpec::Stacked(c.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    RepeatedCv { folds: usize, repeats: usize },
    Holdout { fraction: f64 },
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::RepeatedCv {
            folds: 5,
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Paths to the six source CSVs. Mutually exclusive with `synthetic`.
    #[serde(default)]
    pub inputs: Option<BundlePaths>,
    /// Synthetic-generation parameters. Mutually exclusive with `inputs`.
    #[serde(default)]
    pub synthetic: Option<SyntheticParams>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub protocol: Protocol,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown variant") && msg.contains("kind") {
                CliError::user(format!(
                    "config {}: {msg}; valid model kinds are {MODEL_KINDS}",
                    path.display()
                ))
            } else {
                CliError::user(format!("config {}: {msg}", path.display()))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        match (&self.inputs, &self.synthetic) {
            (Some(_), Some(_)) => Err(CliError::user(
                "config sets both \"inputs\" and \"synthetic\"; exactly one is required",
            )),
            (None, None) => Err(CliError::user(
                "config sets neither \"inputs\" nor \"synthetic\"; exactly one is required",
            )),
            _ => self.validate_protocol(),
        }
    }

    fn validate_protocol(&self) -> Result<(), CliError> {
        match self.protocol {
            Protocol::RepeatedCv { folds, repeats } => {
                if folds < 2 || repeats < 1 {
                    return Err(CliError::user(format!(
                        "protocol repeated-cv requires folds >= 2 and repeats >= 1, got folds={folds} repeats={repeats}"
                    )));
                }
            }
            Protocol::Holdout { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(CliError::user(format!(
                        "protocol holdout requires 0 < fraction < 1, got {fraction}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(
            r#"{{"synthetic": {{"n_zctas": 10, "n_storms": 2, "noise_sigma": 0.1}}, "seed": 1, "out_dir": "/tmp/x"{extra}}}"#
        )
    }

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::user(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse(&minimal("")).unwrap();
        assert_eq!(c.model, ModelConfig::Gbm(Default::default()));
        assert_eq!(c.protocol, Protocol::RepeatedCv { folds: 5, repeats: 5 });
    }

    #[test]
    fn unknown_top_level_key_is_fatal() {
        assert!(parse(&minimal(r#", "modle": {}"#)).is_err());
    }

    #[test]
    fn unknown_hyperparameter_is_fatal() {
        let err = parse(&minimal(r#", "model": {"kind": "gbm", "rounds": 5}"#)).unwrap_err();
        assert!(err.to_string().contains("rounds"), "{err}");
    }

    #[test]
    fn unknown_model_kind_is_fatal() {
        let err = parse(&minimal(r#", "model": {"kind": "svm"}"#)).unwrap_err();
        assert!(err.to_string().contains("svm"), "{err}");
    }

    #[test]
    fn model_override_applies() {
        let c = parse(&minimal(r#", "model": {"kind": "gbm", "n_rounds": 7}"#)).unwrap();
        match c.model {
            ModelConfig::Gbm(g) => assert_eq!(g.n_rounds, 7),
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn both_input_modes_rejected() {
        let text = r#"{"synthetic": {"n_zctas": 1, "n_storms": 1, "noise_sigma": 0.0},
            "inputs": {"storms": "a", "hydro": "b", "buildings": "c",
                       "losses": "d", "hpi": "e", "zcta_centroids": "f"},
            "seed": 1, "out_dir": "/tmp/x"}"#;
        assert!(parse(text).is_err());
    }
}
