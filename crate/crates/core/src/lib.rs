//! Mackey-Glass forecasting with temporal-convolution-derived reservoir
//! computing, its baselines, and a sweep harness.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod mackey_glass;
pub mod readout;
pub mod rng;
pub mod runner;
pub mod series;
pub mod tcrc;

pub use error::{Error, Result};
pub use mackey_glass::{generate, make_benchmark, IntegratorConfig, MackeyGlassParams};
pub use readout::{apply_readout, fit_ridge, ReadoutWeights, StateMatrix, TargetMatrix};
pub use runner::{
    predict_closed_loop, predict_open_loop, train, train_many, ModelKind, PredictionResult,
    TrainedModel,
};
pub use series::{mse, zscore_apply, zscore_fit, zscore_invert, NormStats, SeriesFrame, SplitSpec};
pub use tcrc::{tcrc_elm_init, tcrc_elm_state, tcrc_state, TcrcConfig, TcrcElmConfig};
