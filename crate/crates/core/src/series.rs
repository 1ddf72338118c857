//! Univariate series containers, z-score normalization, delay windows and the
//! MSE metric shared by every model.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this make normalization meaningless.
pub const CONSTANT_SERIES_STD: f64 = 1e-12;

/// A sampled univariate series. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    values: Vec<f64>,
    pub tag: String,
}

impl SeriesFrame {
    pub fn new(values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self {
            values,
            tag: tag.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sample_count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy of `values[range]` carrying the same tag.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            values: self.values[range].to_vec(),
            tag: self.tag.clone(),
        }
    }

    /// Writes the `step,value` CSV form.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["step", "value"])?;
        for (step, v) in self.values.iter().enumerate() {
            w.write_record([step.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(input: R, tag: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| Error::parse("<csv>", e))?.clone();
        if headers.len() != 2 || &headers[0] != "step" || &headers[1] != "value" {
            return Err(Error::parse("<csv>", "expected header `step,value`"));
        }
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse("<csv>", e))?;
            let step: usize = rec[0]
                .parse()
                .map_err(|e| Error::parse("<csv>", format!("row {i}: {e}")))?;
            if step != i {
                return Err(Error::parse(
                    "<csv>",
                    format!("row {i}: step {step} out of order"),
                ));
            }
            let v: f64 = rec[1]
                .parse()
                .map_err(|e| Error::parse("<csv>", format!("row {i}: {e}")))?;
            values.push(v);
        }
        Self::new(values, tag)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_csv(file, tag).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }
}

/// Mean and population standard deviation used for z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Lengths of the initialization, training and test windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub init_len: usize,
    pub train_len: usize,
    pub test_len: usize,
}

impl SplitSpec {
    pub const fn new(init_len: usize, train_len: usize, test_len: usize) -> Self {
        Self {
            init_len,
            train_len,
            test_len,
        }
    }

    pub fn total(&self) -> usize {
        self.init_len + self.train_len + self.test_len
    }

    /// Samples a model needs when it looks `lookback` steps behind its first
    /// training input.
    pub fn required_len(&self, lookback: usize) -> usize {
        lookback + self.train_len + self.test_len + 1
    }

    /// Input steps of the training window in a series of `n` samples.
    ///
    /// The split is anchored at the end: the last `test_len` samples are held
    /// out and the `train_len` samples before them are the one-step-ahead
    /// targets, so input step `t` predicts sample `t + 1`.
    pub fn train_inputs(&self, n: usize, lookback: usize) -> Result<std::ops::Range<usize>> {
        let needed = self.required_len(lookback);
        if n < needed || self.train_len == 0 || self.test_len == 0 {
            return Err(Error::InsufficientHistory {
                needed,
                available: n,
            });
        }
        let start = n - self.test_len - self.train_len - 1;
        Ok(start..start + self.train_len)
    }

    /// Index of the first held-out sample.
    pub fn test_start(&self, n: usize) -> usize {
        n.saturating_sub(self.test_len)
    }
}

impl Default for SplitSpec {
    /// 100 initialization steps, 2000 training steps, 286 test steps (two
    /// Lyapunov times at tau = 17).
    fn default() -> Self {
        Self::new(100, 2000, 286)
    }
}

pub fn zscore_fit(series: &SeriesFrame) -> Result<NormStats> {
    let v = series.values();
    if v.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < CONSTANT_SERIES_STD {
        return Err(Error::ConstantSeries { std });
    }
    Ok(NormStats { mean, std })
}

pub fn zscore_apply(series: &SeriesFrame, stats: &NormStats) -> SeriesFrame {
    SeriesFrame {
        values: series.values.iter().map(|&x| stats.normalize(x)).collect(),
        tag: series.tag.clone(),
    }
}

pub fn zscore_invert(series: &SeriesFrame, stats: &NormStats) -> SeriesFrame {
    SeriesFrame {
        values: series
            .values
            .iter()
            .map(|&x| stats.denormalize(x))
            .collect(),
        tag: series.tag.clone(),
    }
}

/// Mean squared error over two equally long series.
pub fn mse(target: &SeriesFrame, predicted: &SeriesFrame) -> Result<f64> {
    mse_slices(target.values(), predicted.values())
}

pub(crate) fn mse_slices(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: target.len(),
            right: predicted.len(),
        });
    }
    if target.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sum: f64 = target
        .iter()
        .zip(predicted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / target.len() as f64)
}

/// `[x(t), x(t-1), ..., x(t-depth+1)]`, newest first.
pub fn delay_window(series: &SeriesFrame, t: usize, depth: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; depth];
    fill_window(series.values(), t, &mut out)?;
    Ok(out)
}

/// Writes the newest-first window ending at `t` into `out`.
pub(crate) fn fill_window(values: &[f64], t: usize, out: &mut [f64]) -> Result<()> {
    let depth = out.len();
    if depth == 0 || t >= values.len() || t + 1 < depth {
        return Err(Error::OutOfRange { t, depth });
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = values[t - i];
    }
    Ok(())
}
