//! Hurricane loss modeling: data ingest and fusion, spatial joins, feature
//! engineering, from-scratch regressors, and a repeated cross-validation
//! evaluation protocol. Everything is deterministic given a master seed.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod spatial;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    derive_seed, FeatureMatrix, GeoPoint, HpiSeries, HurricaneRecord, HydroCounts, LossRecord,
    Month, Seed, ZctaRecord, HPI_BASELINE,
};
