//! Training and autoregressive prediction, uniform over every model kind.
//!
//! Training is teacher-forced: the model sees ground-truth inputs, its states
//! for the training window are collected column by column and the readout is
//! fit to the next normalized sample. Closed-loop prediction then feeds each
//! output back as the next input for the whole test window.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    elm_init, elm_map, esn_init, esn_step, ngrc_state, ElmConfig, EsnConfig, EsnModel, NgrcConfig,
    SparseMatrix,
};
use crate::error::{Error, Result};
use crate::readout::{apply_readout, ReadoutWeights, RidgeSystem, StateMatrix, TargetMatrix};
use crate::series::{fill_window, zscore_fit, NormStats, SeriesFrame, SplitSpec};
use crate::tcrc::{
    add_state_noise, tcrc_elm_init, tcrc_elm_state, tcrc_state, TcrcConfig, TcrcElmConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Esn(EsnConfig),
    Elm(ElmConfig),
    Ngrc(NgrcConfig),
    Tcrc(TcrcConfig),
    TcrcElm(TcrcElmConfig),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Esn(_) => "esn",
            ModelKind::Elm(_) => "elm",
            ModelKind::Ngrc(_) => "ngrc",
            ModelKind::Tcrc(_) => "tcrc",
            ModelKind::TcrcElm(_) => "tcrc_elm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelKind::Esn(c) => c.validate(),
            ModelKind::Elm(c) => c.validate(),
            ModelKind::Ngrc(c) => c.validate(),
            ModelKind::Tcrc(c) => c.validate(),
            ModelKind::TcrcElm(c) => c.validate(),
        }
    }

    pub fn ridge_beta(&self) -> f64 {
        match self {
            ModelKind::Esn(c) => c.ridge_beta,
            ModelKind::Elm(c) => c.ridge_beta,
            ModelKind::Ngrc(c) => c.ridge_beta,
            ModelKind::Tcrc(c) => c.ridge_beta,
            ModelKind::TcrcElm(c) => c.base.ridge_beta,
        }
    }

    pub fn with_ridge_beta(mut self, beta: f64) -> Self {
        match &mut self {
            ModelKind::Esn(c) => c.ridge_beta = beta,
            ModelKind::Elm(c) => c.ridge_beta = beta,
            ModelKind::Ngrc(c) => c.ridge_beta = beta,
            ModelKind::Tcrc(c) => c.ridge_beta = beta,
            ModelKind::TcrcElm(c) => c.base.ridge_beta = beta,
        }
        self
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelKind::Esn(c) => Some(c.seed),
            ModelKind::Elm(c) => Some(c.seed),
            ModelKind::Ngrc(_) => None,
            ModelKind::Tcrc(c) => Some(c.seed),
            ModelKind::TcrcElm(c) => Some(c.seed),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelKind::Esn(c) => c.seed = seed,
            ModelKind::Elm(c) => c.seed = seed,
            ModelKind::Ngrc(_) => {}
            ModelKind::Tcrc(c) => c.seed = seed,
            ModelKind::TcrcElm(c) => {
                c.seed = seed;
                c.base.seed = seed;
            }
        }
        self
    }

    /// True when the seed cannot influence the result.
    pub fn is_deterministic(&self) -> bool {
        match self {
            ModelKind::Ngrc(_) => true,
            ModelKind::Tcrc(c) => c.is_deterministic(),
            _ => false,
        }
    }

    fn is_recurrent(&self) -> bool {
        matches!(self, ModelKind::Esn(_))
    }

    /// Input window length fed to the state map at every step.
    fn window_len(&self) -> usize {
        match self {
            ModelKind::Esn(c) => c.input_dim,
            ModelKind::Elm(c) => c.input_dim,
            ModelKind::Ngrc(c) => c.delay + 1,
            ModelKind::Tcrc(c) => c.delay + 1,
            ModelKind::TcrcElm(c) => c.base.delay + 1,
        }
    }

    fn washout(&self) -> usize {
        match self {
            ModelKind::Esn(c) => c.washout,
            _ => 0,
        }
    }

    /// Samples needed before the first training input.
    pub fn lookback(&self) -> usize {
        self.washout() + self.window_len() - 1
    }

    pub fn state_len(&self) -> usize {
        match self {
            ModelKind::Esn(c) => c.reservoir_size,
            ModelKind::Elm(c) => c.hidden_size,
            ModelKind::Ngrc(c) => c.feature_len(),
            ModelKind::Tcrc(c) => c.state_len(),
            ModelKind::TcrcElm(c) => c.state_len(),
        }
    }

    fn noise(&self) -> (f64, u64) {
        match self {
            ModelKind::Tcrc(c) => (c.noise_std, c.seed),
            ModelKind::TcrcElm(c) => (c.base.noise_std, c.seed),
            _ => (0.0, 0),
        }
    }
}

/// The random matrices a kind draws at construction, kept so a trained model
/// is self-contained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrozenWeights {
    #[serde(default, with = "dense_json", skip_serializing_if = "Option::is_none")]
    pub w_in: Option<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_r: Option<SparseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub norm_stats: NormStats,
    pub readout: ReadoutWeights,
    #[serde(default)]
    pub frozen: FrozenWeights,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trained models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::parse("<model>", e))?;
        if m.readout.state_len() != m.kind.state_len() {
            return Err(Error::dims(
                format!("readout over {} states", m.kind.state_len()),
                format!("{} columns", m.readout.state_len()),
            ));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// Normalized predictions; shorter than the target when diverged.
    pub predicted: SeriesFrame,
    pub target: SeriesFrame,
    pub mse: f64,
    pub diverged: bool,
}

impl PredictionResult {
    /// `step,target,predicted`; the predicted cell is empty after divergence.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["step", "target", "predicted"])?;
        for (k, t) in self.target.values().iter().enumerate() {
            let p = self
                .predicted
                .values()
                .get(k)
                .map(|v| v.to_string())
                .unwrap_or_default();
            w.write_record([k.to_string(), t.to_string(), p])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stateful view of a kind's state map during one pass over a series.
enum Driver {
    Esn(Box<EsnModel>),
    Elm(ElmConfig, DMatrix<f64>),
    Ngrc,
    Tcrc(TcrcConfig),
    TcrcElm(TcrcElmConfig, DMatrix<f64>),
}

impl Driver {
    fn build(kind: &ModelKind) -> Result<(Self, FrozenWeights)> {
        Ok(match kind {
            ModelKind::Esn(c) => {
                let m = esn_init(c)?;
                let frozen = FrozenWeights {
                    w_in: Some(m.w_in.clone()),
                    w_r: Some(m.w_r.clone()),
                };
                (Driver::Esn(Box::new(m)), frozen)
            }
            ModelKind::Elm(c) => {
                let w = elm_init(c)?;
                let frozen = FrozenWeights {
                    w_in: Some(w.clone()),
                    w_r: None,
                };
                (Driver::Elm(*c, w), frozen)
            }
            ModelKind::Ngrc(_) => (Driver::Ngrc, FrozenWeights::default()),
            ModelKind::Tcrc(c) => (Driver::Tcrc(*c), FrozenWeights::default()),
            ModelKind::TcrcElm(c) => {
                let w = tcrc_elm_init(c)?;
                let frozen = FrozenWeights {
                    w_in: Some(w.clone()),
                    w_r: None,
                };
                (Driver::TcrcElm(*c, w), frozen)
            }
        })
    }

    fn restore(model: &TrainedModel) -> Result<Self> {
        let missing = |what: &str| {
            Error::InvalidConfig(format!("{} model is missing its {what}", model.kind.name()))
        };
        let w_in = || {
            model
                .frozen
                .w_in
                .clone()
                .ok_or_else(|| missing("input weights"))
        };
        Ok(match &model.kind {
            ModelKind::Esn(c) => {
                let w_r = model
                    .frozen
                    .w_r
                    .clone()
                    .ok_or_else(|| missing("reservoir"))?;
                Driver::Esn(Box::new(EsnModel::from_parts(*c, w_in()?, w_r)?))
            }
            ModelKind::Elm(c) => Driver::Elm(*c, w_in()?),
            ModelKind::Ngrc(_) => Driver::Ngrc,
            ModelKind::Tcrc(c) => Driver::Tcrc(*c),
            ModelKind::TcrcElm(c) => Driver::TcrcElm(*c, w_in()?),
        })
    }

    fn state(&mut self, window: &[f64]) -> Result<Vec<f64>> {
        match self {
            Driver::Esn(m) => esn_step(m, window).map(<[f64]>::to_vec),
            Driver::Elm(c, w) => elm_map(c, w, window),
            Driver::Ngrc => ngrc_state(window),
            Driver::Tcrc(c) => tcrc_state(window, c),
            Driver::TcrcElm(c, w) => tcrc_elm_state(window, c, w),
        }
    }

    /// Advances a recurrent state without producing a column.
    fn drive(&mut self, window: &[f64]) -> Result<()> {
        if let Driver::Esn(m) = self {
            esn_step(m, window)?;
        }
        Ok(())
    }
}

fn check_length(series: &SeriesFrame, split: &SplitSpec, kind: &ModelKind) -> Result<()> {
    let needed = split.required_len(kind.lookback());
    if series.sample_count() < needed || split.train_len == 0 || split.test_len == 0 {
        return Err(Error::InsufficientData {
            needed,
            available: series.sample_count(),
        });
    }
    Ok(())
}

/// Normalization statistics over the training window: the first training
/// input through the last training target.
fn fit_stats(series: &SeriesFrame, split: &SplitSpec) -> Result<NormStats> {
    let n = series.sample_count();
    let end = split.test_start(n);
    zscore_fit(&series.slice(end - split.train_len - 1..end))
}

/// Trains one model per ridge value from a single pass of state collection.
/// The kind's own `ridge_beta` is replaced by each entry of `betas`.
pub fn train_many(
    series: &SeriesFrame,
    split: &SplitSpec,
    kind: &ModelKind,
    betas: &[f64],
) -> Result<Vec<TrainedModel>> {
    kind.validate()?;
    check_length(series, split, kind)?;
    let n = series.sample_count();
    let norm_stats = fit_stats(series, split)?;
    let z: Vec<f64> = series
        .values()
        .iter()
        .map(|&v| norm_stats.normalize(v))
        .collect();

    let (mut driver, frozen) = Driver::build(kind)?;
    let steps = split.train_inputs(n, kind.lookback())?;
    let mut window = vec![0.0; kind.window_len()];
    for t in steps.start - kind.washout()..steps.start {
        fill_window(&z, t, &mut window)?;
        driver.drive(&window)?;
    }
    let mut states = DMatrix::zeros(kind.state_len(), split.train_len);
    let mut targets = Vec::with_capacity(split.train_len);
    for (col, t) in steps.enumerate() {
        fill_window(&z, t, &mut window)?;
        let s = driver.state(&window)?;
        states.column_mut(col).copy_from_slice(&s);
        targets.push(z[t + 1]);
    }
    let (noise_std, noise_seed) = kind.noise();
    add_state_noise(&mut states, noise_std, noise_seed);

    let states = StateMatrix::new(states)?;
    let targets = TargetMatrix::from_row(&targets)?;
    let mut system = RidgeSystem::new(&states, &targets)?;
    betas
        .iter()
        .map(|&beta| {
            Ok(TrainedModel {
                kind: kind.with_ridge_beta(beta),
                norm_stats,
                readout: system.solve(beta)?,
                frozen: frozen.clone(),
            })
        })
        .collect()
}

pub fn train(series: &SeriesFrame, split: &SplitSpec, kind: &ModelKind) -> Result<TrainedModel> {
    Ok(train_many(series, split, kind, &[kind.ridge_beta()])?.remove(0))
}

/// Re-runs the recurrent state over the washout and training inputs so
/// prediction continues from the state training ended in. Returns the step of
/// the first test input, the sample just before the test window.
fn warm_start(
    driver: &mut Driver,
    kind: &ModelKind,
    z: &[f64],
    split: &SplitSpec,
) -> Result<usize> {
    let steps = split.train_inputs(z.len(), kind.lookback())?;
    if kind.is_recurrent() {
        let mut window = vec![0.0; kind.window_len()];
        for t in steps.start - kind.washout()..steps.end {
            fill_window(z, t, &mut window)?;
            driver.drive(&window)?;
        }
    }
    Ok(steps.end)
}

fn predict(
    model: &TrainedModel,
    series: &SeriesFrame,
    split: &SplitSpec,
    closed_loop: bool,
) -> Result<PredictionResult> {
    check_length(series, split, &model.kind)?;
    let n = series.sample_count();
    let test_start = split.test_start(n);
    let stats = model.norm_stats;
    let z: Vec<f64> = series
        .values()
        .iter()
        .map(|&v| stats.normalize(v))
        .collect();
    let target = SeriesFrame::new(z[test_start..].to_vec(), series.tag.clone())?;

    let mut driver = Driver::restore(model)?;
    let first = warm_start(&mut driver, &model.kind, &z, split)?;
    // Inputs: ground truth before the test window, own outputs after it.
    let mut inputs: Vec<f64> = if closed_loop {
        z[..test_start].to_vec()
    } else {
        z.clone()
    };
    let mut window = vec![0.0; model.kind.window_len()];
    let mut predicted = Vec::with_capacity(split.test_len);
    let mut diverged = false;
    for k in 0..split.test_len {
        fill_window(&inputs, first + k, &mut window)?;
        let s = driver.state(&window)?;
        let y = apply_readout(&model.readout, &s)?[0];
        if !y.is_finite() {
            diverged = true;
            break;
        }
        predicted.push(y);
        if closed_loop {
            inputs.push(y);
        }
    }
    let mse = if diverged {
        f64::INFINITY
    } else {
        crate::series::mse_slices(target.values(), &predicted)?
    };
    // Finite outputs can still overflow the squared error.
    let diverged = diverged || !mse.is_finite();
    Ok(PredictionResult {
        predicted: SeriesFrame::new(predicted, series.tag.clone())?,
        target,
        mse: if diverged { f64::INFINITY } else { mse },
        diverged,
    })
}

/// Autoregressive rollout over the test window; never reads test samples as
/// inputs.
pub fn predict_closed_loop(
    model: &TrainedModel,
    series: &SeriesFrame,
    split: &SplitSpec,
) -> Result<PredictionResult> {
    predict(model, series, split, true)
}

/// One-step-ahead predictions with ground-truth inputs throughout.
pub fn predict_open_loop(
    model: &TrainedModel,
    series: &SeriesFrame,
    split: &SplitSpec,
) -> Result<PredictionResult> {
    predict(model, series, split, false)
}

/// Row-major `{rows, cols, data}` encoding of an optional dense matrix.
mod dense_json {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref()
            .map(|m| Dense {
                rows: m.nrows(),
                cols: m.ncols(),
                data: m.transpose().as_slice().to_vec(),
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        let dense = Option::<Dense>::deserialize(d)?;
        dense
            .map(|m| {
                if m.data.len() != m.rows * m.cols {
                    return Err(serde::de::Error::custom(
                        "matrix data does not match its shape",
                    ));
                }
                Ok(DMatrix::from_row_slice(m.rows, m.cols, &m.data))
            })
            .transpose()
    }
}
