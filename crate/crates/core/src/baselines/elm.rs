use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::esn::uniform_dense;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElmConfig {
    pub hidden_size: usize,
    #[serde(default = "super::default_weight_scale")]
    pub weight_scale: f64,
    #[serde(default = "super::default_ridge_beta")]
    pub ridge_beta: f64,
    #[serde(default = "super::default_input_dim")]
    pub input_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ElmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig(
                "elm: hidden_size and input_dim must be positive".into(),
            ));
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite())
            || !(self.ridge_beta >= 0.0 && self.ridge_beta.is_finite())
        {
            return Err(Error::InvalidConfig(
                "elm: weight_scale must be positive and ridge_beta nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Input weights drawn from the same stream an ESN with this seed uses, so an
/// ESN at zero spectral radius and an ELM of equal size share `W_in`.
pub fn elm_init(config: &ElmConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    Ok(uniform_dense(
        config.seed,
        config.hidden_size,
        config.input_dim,
        config.weight_scale,
    ))
}

/// `tanh(W_in u)`.
pub fn elm_map(config: &ElmConfig, w_in: &DMatrix<f64>, input: &[f64]) -> Result<Vec<f64>> {
    if w_in.shape() != (config.hidden_size, config.input_dim) || input.len() != config.input_dim {
        return Err(Error::dims(
            format!(
                "{}x{} weights and input {}",
                config.hidden_size, config.input_dim, config.input_dim
            ),
            format!(
                "{}x{} weights and input {}",
                w_in.nrows(),
                w_in.ncols(),
                input.len()
            ),
        ));
    }
    Ok(w_in
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(input)
                .map(|(w, u)| w * u)
                .sum::<f64>()
                .tanh()
        })
        .collect())
}
