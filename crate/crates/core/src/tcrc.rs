//! Temporal-convolution-derived reservoir states.
//!
//! A newest-first window `[x(t), x(t-1), ..., x(t-d)]` is mapped without any
//! randomness: layer 1 holds the `d` adjacent products `x(t-i) * x(t-i-1)`,
//! and each further layer multiplies neighbouring tokens of the layer below,
//! so layer `j` has `d - j + 1` tokens and token `i` of layer `j` is the
//! product of the contiguous run `x(t-i) ... x(t-i-j)`. The state is
//! `tanh` of the raw residual block `x(t) ... x(t-d+1)` followed by every
//! layer, with optional zero padding appended after the activation.
//!
//! TCRC-ELM pushes the same pre-activation vector through one dense random
//! layer of `n` times the state size.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::StateMatrix;
use crate::rng::{stream, Stream};
use crate::series::{fill_window, SeriesFrame, SplitSpec};

/// Uniform bound of the TCRC-ELM expansion weights.
pub const EXPANSION_WEIGHT_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcrcConfig {
    pub delay: usize,
    #[serde(default = "one")]
    pub layers: usize,
    #[serde(default)]
    pub ridge_beta: f64,
    #[serde(default)]
    pub zero_pad: usize,
    #[serde(default)]
    pub noise_std: f64,
    /// Seed of the training-state noise; unused when `noise_std` is 0.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl TcrcConfig {
    pub fn new(delay: usize, layers: usize, ridge_beta: f64) -> Self {
        Self {
            delay,
            layers,
            ridge_beta,
            zero_pad: 0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delay < 2 {
            return Err(Error::InvalidConfig(format!(
                "tcrc: delay must be at least 2, got {}",
                self.delay
            )));
        }
        if self.layers == 0 {
            return Err(Error::InvalidConfig("tcrc: layers must be positive".into()));
        }
        if self.layers > self.delay {
            return Err(Error::TooManyLayers {
                layers: self.layers,
                delay: self.delay,
            });
        }
        if !(self.ridge_beta >= 0.0 && self.ridge_beta.is_finite())
            || !(self.noise_std >= 0.0 && self.noise_std.is_finite())
        {
            return Err(Error::InvalidConfig(
                "tcrc: ridge_beta and noise_std must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Length of the concatenation before activation and padding.
    pub fn pre_activation_len(&self) -> usize {
        let (d, l) = (self.delay, self.layers);
        d + l * d - l * (l - 1) / 2
    }

    /// `N^r = d + L d - L(L-1)/2 + zero_pad`.
    pub fn state_len(&self) -> usize {
        self.pre_activation_len() + self.zero_pad
    }

    pub fn is_deterministic(&self) -> bool {
        self.noise_std == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTokens {
    pub per_layer: Vec<Vec<f64>>,
}

impl LayerTokens {
    pub fn layer(&self, j: usize) -> &[f64] {
        &self.per_layer[j - 1]
    }
}

fn check_window(window: &[f64], layers: usize) -> Result<usize> {
    if window.len() < 3 {
        return Err(Error::WindowTooShort {
            needed: 3,
            actual: window.len(),
        });
    }
    let delay = window.len() - 1;
    if layers == 0 || layers > delay {
        return Err(Error::TooManyLayers { layers, delay });
    }
    Ok(delay)
}

pub fn tcrc_tokens(window: &[f64], layers: usize) -> Result<LayerTokens> {
    check_window(window, layers)?;
    let mut per_layer: Vec<Vec<f64>> = Vec::with_capacity(layers);
    let mut prev = window;
    for _ in 0..layers {
        let next: Vec<f64> = prev.windows(2).map(|p| p[0] * p[1]).collect();
        per_layer.push(next);
        prev = per_layer.last().unwrap();
    }
    Ok(LayerTokens { per_layer })
}

fn expect_window(window: &[f64], config: &TcrcConfig) -> Result<()> {
    if window.len() != config.delay + 1 {
        return Err(Error::WindowTooShort {
            needed: config.delay + 1,
            actual: window.len(),
        });
    }
    Ok(())
}

/// `[x(t) .. x(t-d+1) ; layer 1 ; .. ; layer L]`, before `tanh` and padding.
pub fn tcrc_pre_activation(window: &[f64], config: &TcrcConfig) -> Result<Vec<f64>> {
    expect_window(window, config)?;
    let tokens = tcrc_tokens(window, config.layers)?;
    let mut z = Vec::with_capacity(config.pre_activation_len());
    z.extend_from_slice(&window[..config.delay]);
    for layer in &tokens.per_layer {
        z.extend_from_slice(layer);
    }
    Ok(z)
}

pub fn tcrc_state(window: &[f64], config: &TcrcConfig) -> Result<Vec<f64>> {
    let mut s = tcrc_pre_activation(window, config)?;
    s.iter_mut().for_each(|v| *v = v.tanh());
    s.resize(config.state_len(), 0.0);
    Ok(s)
}

/// Adds `N(0, std)` to every entry, column by column, from the seed's noise
/// stream.
pub(crate) fn add_state_noise(states: &mut DMatrix<f64>, std: f64, seed: u64) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("noise std is finite and positive");
    let mut rng = stream(seed, Stream::StateNoise);
    for v in states.iter_mut() {
        *v += normal.sample(&mut rng);
    }
}

/// One state column per training step of `series` (already normalized),
/// with training noise applied when configured.
pub fn tcrc_train_states(
    series: &SeriesFrame,
    split: &SplitSpec,
    config: &TcrcConfig,
    noise_seed: u64,
) -> Result<StateMatrix> {
    config.validate()?;
    let steps = split.train_inputs(series.sample_count(), config.delay)?;
    let mut window = vec![0.0; config.delay + 1];
    let mut m = DMatrix::zeros(config.state_len(), split.train_len);
    for (col, t) in steps.enumerate() {
        fill_window(series.values(), t, &mut window)?;
        let s = tcrc_state(&window, config)?;
        m.column_mut(col).copy_from_slice(&s);
    }
    add_state_noise(&mut m, config.noise_std, noise_seed);
    StateMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcrcElmConfig {
    pub base: TcrcConfig,
    pub expansion_factor: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub include_base_state: bool,
}

impl TcrcElmConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.expansion_factor == 0 {
            return Err(Error::InvalidConfig(
                "tcrc_elm: expansion_factor must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `N^{r'} = n * N^r`.
    pub fn expanded_len(&self) -> usize {
        self.expansion_factor * self.base.state_len()
    }

    pub fn state_len(&self) -> usize {
        self.expanded_len()
            + if self.include_base_state {
                self.base.state_len()
            } else {
                0
            }
    }
}

/// Dense `(n N^r) x N^r` matrix, entries uniform in `(-0.5, 0.5)`.
pub fn tcrc_elm_init(config: &TcrcElmConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let (rows, cols) = (config.expanded_len(), config.base.state_len());
    let mut rng = stream(config.seed, Stream::InputWeights);
    let s = EXPANSION_WEIGHT_SCALE;
    let row_major: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-s..s)).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &row_major))
}

/// `tanh(W_in z)` where `z` is the TCRC pre-activation vector (padded with
/// zeros to `N^r`), optionally followed by the TCRC state itself.
pub fn tcrc_elm_state(
    window: &[f64],
    config: &TcrcElmConfig,
    w_in: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let expected = (config.expanded_len(), config.base.state_len());
    if w_in.shape() != expected {
        return Err(Error::dims(
            format!("{}x{} expansion weights", expected.0, expected.1),
            format!("{}x{}", w_in.nrows(), w_in.ncols()),
        ));
    }
    let z = tcrc_pre_activation(window, &config.base)?;
    let active = z.len();
    let mut out: Vec<f64> = w_in
        .row_iter()
        .map(|row| {
            row.iter()
                .take(active)
                .zip(&z)
                .map(|(w, v)| w * v)
                .sum::<f64>()
                .tanh()
        })
        .collect();
    if config.include_base_state {
        out.extend(z.iter().map(|v| v.tanh()));
        out.resize(config.state_len(), 0.0);
    }
    Ok(out)
}
