use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::runner::PredictionResult;

/// One executed (config point, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub point: usize,
    pub seed: u64,
    pub seed_invariant: bool,
    pub baseline: String,
    #[serde(with = "real_text")]
    pub mse: f64,
    pub diverged: bool,
    /// Empty unless the cell failed before producing a prediction.
    pub error: String,
    /// The fully resolved model config as compact JSON.
    pub config: String,
    #[serde(skip)]
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }

    fn sort_key(&self) -> (usize, u64) {
        (self.point, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub rows: Vec<ResultRow>,
    /// Closed-loop rollout of each point's first seed, keyed by point.
    pub predictions: BTreeMap<usize, PredictionResult>,
}

impl ExperimentReport {
    pub fn sort(&mut self) {
        self.rows.sort_by_key(ResultRow::sort_key);
    }

    pub fn summary(&self) -> Summary {
        summarize(&self.rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub model: String,
    pub point: usize,
    pub config: Value,
    pub runs: usize,
    pub seed_invariant: bool,
    #[serde(serialize_with = "real_json")]
    pub mean_mse: f64,
    #[serde(serialize_with = "real_json")]
    pub min_mse: f64,
    #[serde(serialize_with = "real_json")]
    pub max_mse: f64,
    pub diverged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPoint {
    pub model: String,
    pub point: usize,
    #[serde(serialize_with = "real_json")]
    pub mean_mse: f64,
    /// `(candidate - baseline) / baseline * 100`; negative is better.
    #[serde(serialize_with = "opt_real_json")]
    pub relative_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub dataset: Option<String>,
    pub baseline: Option<String>,
    pub rows: usize,
    pub points: Vec<PointSummary>,
    pub best: Vec<BestPoint>,
}

impl Summary {
    pub fn best_for(&self, model: &str) -> Option<&BestPoint> {
        self.best.iter().find(|b| b.model == model)
    }

    pub fn point(&self, point: usize) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.point == point)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summaries serialize");
        s.push('\n');
        s
    }
}

pub fn relative_improvement(candidate: f64, baseline: f64) -> f64 {
    (candidate - baseline) / baseline * 100.0
}

fn strip_seeds(v: &mut Value) {
    if let Value::Object(map) = v {
        map.remove("seed");
        map.values_mut().for_each(strip_seeds);
    }
}

/// Aggregates rows per config point. Diverged and failed rows count as
/// `+inf` in the mean, min and max.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut groups: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for r in sorted {
        groups.entry(r.point).or_default().push(r);
    }
    let points: Vec<PointSummary> = groups
        .into_iter()
        .map(|(point, rs)| {
            let vals: Vec<f64> = rs
                .iter()
                .map(|r| if r.failed() { f64::INFINITY } else { r.mse })
                .collect();
            let mut config: Value = serde_json::from_str(&rs[0].config).unwrap_or(Value::Null);
            strip_seeds(&mut config);
            PointSummary {
                model: rs[0].model.clone(),
                point,
                config,
                runs: rs.len(),
                seed_invariant: rs.iter().all(|r| r.seed_invariant),
                mean_mse: vals.iter().sum::<f64>() / vals.len() as f64,
                min_mse: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max_mse: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                diverged: rs.iter().filter(|r| r.diverged).count(),
                failed: rs.iter().filter(|r| r.failed()).count(),
            }
        })
        .collect();

    let mut best: BTreeMap<&str, &PointSummary> = BTreeMap::new();
    for p in &points {
        let slot = best.entry(&p.model).or_insert(p);
        if p.mean_mse < slot.mean_mse {
            *slot = p;
        }
    }
    let baseline = rows.first().map(|r| r.baseline.clone());
    let base_mse = baseline
        .as_deref()
        .and_then(|b| best.get(b))
        .map(|p| p.mean_mse)
        .filter(|m| m.is_finite() && *m > 0.0);
    let best = best
        .values()
        .map(|p| BestPoint {
            model: p.model.clone(),
            point: p.point,
            mean_mse: p.mean_mse,
            relative_improvement_pct: base_mse.map(|b| relative_improvement(p.mean_mse, b)),
        })
        .collect();
    Summary {
        dataset: rows.first().map(|r| r.dataset.clone()),
        baseline,
        rows: rows.len(),
        points,
        best,
    }
}

const RESULT_COLUMNS: [&str; 10] = [
    "dataset",
    "model",
    "point",
    "seed",
    "seed_invariant",
    "baseline",
    "mse",
    "diverged",
    "error",
    "config",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    w.write_record(RESULT_COLUMNS)
        .map_err(|e| csv_error(path, e))?;
    for r in sorted {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(Error::parse(path, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn write_timings(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    w.write_record(["model", "point", "seed", "wall_ms"])
        .map_err(|e| csv_error(path, e))?;
    for r in sorted {
        w.write_record([
            r.model.clone(),
            r.point.to_string(),
            r.seed.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `timings.csv`, `summary.json` and one
/// `predictions/<model>_p<point>.csv` per best point.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results_csv(&report.rows, &dir.join("results.csv"))?;
    write_timings(&report.rows, &dir.join("timings.csv"))?;
    let summary = report.summary();
    write_text(&dir.join("summary.json"), &summary.to_json())?;
    let pred_dir = dir.join("predictions");
    for b in &summary.best {
        if let Some(p) = report.predictions.get(&b.point) {
            fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
            let path = pred_dir.join(format!("{}_p{}.csv", b.model, b.point));
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            p.write_csv(f).map_err(|e| csv_error(&path, e))?;
        }
    }
    Ok(())
}

/// Rebuilds `summary.json` in `out_dir` from a `results.csv` alone.
pub fn summarize_results_csv(results: &Path, out_dir: &Path) -> Result<Summary> {
    let rows = read_results_csv(results)?;
    let summary = summarize(&rows);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_text(&out_dir.join("summary.json"), &summary.to_json())?;
    Ok(summary)
}

/// Shortest round-trip decimal text, scientific outside `[1e-4, 1e6)`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e6).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn non_finite_text(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

fn real_json<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(non_finite_text(*v))
    }
}

fn opt_real_json<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => real_json(v, s),
        None => s.serialize_none(),
    }
}

mod real_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_real(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.trim().parse().map_err(serde::de::Error::custom)
    }
}
