//! Reference models: echo state network, extreme learning machine and the
//! NG-RC feature map.

pub mod elm;
pub mod esn;
pub mod ngrc;

pub use elm::{elm_init, elm_map, ElmConfig};
pub use esn::{esn_init, esn_step, spectral_radius, EsnConfig, EsnModel, SparseMatrix};
pub use ngrc::{ngrc_features, ngrc_state, NgrcConfig};

/// Uniform bound for random weight draws, shared with TCRC-ELM.
pub(crate) fn default_weight_scale() -> f64 {
    0.5
}

pub(crate) fn default_ridge_beta() -> f64 {
    1e-6
}

pub(crate) fn default_input_dim() -> usize {
    1
}
