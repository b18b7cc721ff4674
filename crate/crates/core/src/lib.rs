//! Numerical core for explaining day-ahead electricity price forecasters.
//!
//! The crate is `no_std` (with `alloc`) and free of IO. It covers:
//!
//! * hourly series, market feature layouts and lagged feature matrices ([`series`], [`market`], [`features`]);
//! * input/output scalers ([`scaler`]);
//! * the two-hidden-layer MLP forecaster and its Adam/MAE trainer ([`mlp`], [`train`]);
//! * gradient and Shapley attributions ([`attribution`]);
//! * super-variable (SSHAP) aggregation, kernel-smoothed SSHAP lines and the slope check ([`sshap`]);
//! * heatmaps, importance curves, error and complexity metrics ([`analytics`]).
//!
//! File formats, the CLI and rendering live in the `epfx` companion crate.
#![no_std]

extern crate alloc;

pub mod analytics;
pub mod attribution;
pub mod error;
pub mod features;
pub mod market;
pub mod math;
pub mod mlp;
pub mod scaler;
pub mod series;
pub mod sshap;
pub mod train;

pub use error::{Error, Result};
pub use features::{build_feature_matrix, FeatureMatrix};
pub use market::{FeatureId, MarketConfig, MarketId, Source, SuperVariable};
pub use mlp::{Activation, Forecaster, Init, ModelSpec, TrainedModel};
pub use scaler::{ScalerKind, ScalerParams};
pub use series::{Day, HourlySeries};
pub use train::TrainingHyperparams;

/// Number of hourly products in a day-ahead auction, and so the output width of every model.
pub const HOURS: usize = 24;
