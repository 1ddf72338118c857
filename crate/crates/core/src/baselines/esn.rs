use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnConfig {
    pub reservoir_size: usize,
    pub spectral_radius: f64,
    #[serde(default = "super::default_weight_scale")]
    pub weight_scale: f64,
    #[serde(default = "default_connectivity")]
    pub connectivity: f64,
    #[serde(default = "super::default_ridge_beta")]
    pub ridge_beta: f64,
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default = "super::default_input_dim")]
    pub input_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_connectivity() -> f64 {
    0.1
}

fn default_washout() -> usize {
    100
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            reservoir_size: 1000,
            spectral_radius: 0.9,
            weight_scale: super::default_weight_scale(),
            connectivity: default_connectivity(),
            ridge_beta: super::default_ridge_beta(),
            washout: default_washout(),
            input_dim: super::default_input_dim(),
            seed: 0,
        }
    }
}

impl EsnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("esn: {m}")));
        if self.reservoir_size == 0 {
            return bad("reservoir_size must be positive");
        }
        if !(self.spectral_radius >= 0.0 && self.spectral_radius.is_finite()) {
            return bad("spectral_radius must be finite and >= 0");
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return bad("connectivity must lie in (0, 1]");
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return bad("weight_scale must be positive");
        }
        if !(self.ridge_beta >= 0.0 && self.ridge_beta.is_finite()) {
            return bad("ridge_beta must be finite and >= 0");
        }
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        Ok(())
    }
}

/// Row-compressed sparse square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SparseJson", into = "SparseJson")]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

/// Wire form: coordinate triplets in row-major order.
#[derive(Serialize, Deserialize)]
struct SparseJson {
    dim: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl From<SparseMatrix> for SparseJson {
    fn from(m: SparseMatrix) -> Self {
        let rows = (0..m.n)
            .flat_map(|r| std::iter::repeat_n(r, m.row_start[r + 1] - m.row_start[r]))
            .collect();
        SparseJson {
            dim: m.n,
            rows,
            cols: m.cols,
            values: m.values,
        }
    }
}

impl TryFrom<SparseJson> for SparseMatrix {
    type Error = String;

    fn try_from(j: SparseJson) -> Result<Self, String> {
        let len = j.values.len();
        if j.rows.len() != len || j.cols.len() != len {
            return Err("sparse matrix triplet arrays differ in length".into());
        }
        if j.rows.windows(2).any(|w| w[0] > w[1]) {
            return Err("sparse matrix rows must be sorted".into());
        }
        if j.rows.iter().chain(&j.cols).any(|&i| i >= j.dim) {
            return Err("sparse matrix index out of range".into());
        }
        if j.values.iter().any(|v| !v.is_finite()) {
            return Err("sparse matrix values must be finite".into());
        }
        let mut row_start = vec![0; j.dim + 1];
        for &r in &j.rows {
            row_start[r + 1] += 1;
        }
        for r in 0..j.dim {
            row_start[r + 1] += row_start[r];
        }
        Ok(SparseMatrix {
            n: j.dim,
            row_start,
            cols: j.cols,
            values: j.values,
        })
    }
}

impl SparseMatrix {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            row_start: vec![0; n + 1],
            cols: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[k])] = self.values[k];
            }
        }
        m
    }

    /// `out[r] += sum_c A[r, c] * x[c]`
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let span = self.row_start[r]..self.row_start[r + 1];
            *o += self.cols[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum::<f64>();
        }
    }

    fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Largest eigenvalue magnitude, from the full complex spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

type RadiusKey = (u64, usize, u64, u64);

/// Raw-draw radii keyed by everything that determines the draw. A
/// thousand-node eigendecomposition costs seconds and sweeps revisit the same
/// draw for every spectral radius and ridge value.
fn radius_cache() -> &'static Mutex<HashMap<RadiusKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<RadiusKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

#[derive(Debug, Clone)]
pub struct EsnModel {
    pub w_in: DMatrix<f64>,
    pub w_r: SparseMatrix,
    pub config: EsnConfig,
    pub state: Vec<f64>,
    scratch: Vec<f64>,
}

pub(crate) fn uniform_dense(seed: u64, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    let mut rng = stream(seed, Stream::InputWeights);
    let row_major: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    DMatrix::from_row_slice(rows, cols, &row_major)
}

fn raw_reservoir(config: &EsnConfig) -> SparseMatrix {
    let n = config.reservoir_size;
    let d = config.weight_scale;
    let mut rng = stream(config.seed, Stream::RecurrentWeights);
    let mut m = SparseMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            if rng.random::<f64>() < config.connectivity {
                m.cols.push(c);
                m.values.push(rng.random_range(-d..d));
            }
        }
        m.row_start[r + 1] = m.cols.len();
    }
    m
}

pub fn esn_init(config: &EsnConfig) -> Result<EsnModel> {
    config.validate()?;
    let n = config.reservoir_size;
    let w_in = uniform_dense(config.seed, n, config.input_dim, config.weight_scale);
    let w_r = if config.spectral_radius == 0.0 {
        SparseMatrix::zeros(n)
    } else {
        let mut w = raw_reservoir(config);
        let key = (
            config.seed,
            n,
            config.connectivity.to_bits(),
            config.weight_scale.to_bits(),
        );
        let cached = radius_cache().lock().unwrap().get(&key).copied();
        let raw = match cached {
            Some(r) => r,
            None => {
                let r = spectral_radius(&w.to_dense());
                radius_cache().lock().unwrap().insert(key, r);
                r
            }
        };
        if raw == 0.0 {
            return Err(Error::ZeroSpectralRadius);
        }
        w.scale(config.spectral_radius / raw);
        w
    };
    Ok(EsnModel {
        w_in,
        w_r,
        config: *config,
        state: vec![0.0; n],
        scratch: vec![0.0; n],
    })
}

impl EsnModel {
    /// Reassembles a model from stored weights, with a zero state.
    pub fn from_parts(config: EsnConfig, w_in: DMatrix<f64>, w_r: SparseMatrix) -> Result<Self> {
        let n = config.reservoir_size;
        if w_in.shape() != (n, config.input_dim) || w_r.dim() != n {
            return Err(Error::dims(
                format!(
                    "{n}x{} input and {n}x{n} reservoir weights",
                    config.input_dim
                ),
                format!(
                    "{}x{} and {}x{}",
                    w_in.nrows(),
                    w_in.ncols(),
                    w_r.dim(),
                    w_r.dim()
                ),
            ));
        }
        Ok(Self {
            w_in,
            w_r,
            config,
            state: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    pub fn reservoir_size(&self) -> usize {
        self.config.reservoir_size
    }
}

/// `s <- tanh(W_in u + W_r s)`; returns the new state.
pub fn esn_step<'m>(model: &'m mut EsnModel, input: &[f64]) -> Result<&'m [f64]> {
    if input.len() != model.w_in.ncols() {
        return Err(Error::dims(
            format!("input of length {}", model.w_in.ncols()),
            format!("length {}", input.len()),
        ));
    }
    let pre = &mut model.scratch;
    for (r, p) in pre.iter_mut().enumerate() {
        *p = input
            .iter()
            .enumerate()
            .map(|(c, u)| model.w_in[(r, c)] * u)
            .sum();
    }
    model.w_r.mul_add(&model.state, pre);
    for (s, p) in model.state.iter_mut().zip(pre.iter()) {
        *s = p.tanh();
    }
    Ok(&model.state)
}
