use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{ExperimentReport, ResultRow};
use super::spec::ExperimentSpec;
use crate::error::{Error, Result};
use crate::mackey_glass::generate;
use crate::runner::{predict_closed_loop, train_many, ModelKind, PredictionResult};
use crate::series::{SeriesFrame, SplitSpec};

/// Cells sharing a config up to `ridge_beta` and a seed; their states are
/// collected once and each ridge value is a separate readout fit.
struct Job {
    kind: ModelKind,
    seed: u64,
    seed_invariant: bool,
    /// `(point, ridge_beta)` per cell.
    cells: Vec<(usize, f64)>,
}

fn plan(points: &[ModelKind], seeds: &[u64]) -> Vec<Job> {
    let mut jobs: Vec<Job> = Vec::new();
    let mut index: BTreeMap<(String, u64), usize> = BTreeMap::new();
    for (point, kind) in points.iter().enumerate() {
        let invariant = kind.is_deterministic();
        let cell_seeds = if invariant { &seeds[..1] } else { seeds };
        for &seed in cell_seeds {
            let seeded = kind.with_seed(seed);
            let key = serde_json::to_string(&seeded.with_ridge_beta(0.0)).expect("kinds serialize");
            let slot = *index.entry((key, seed)).or_insert_with(|| {
                jobs.push(Job {
                    kind: seeded,
                    seed,
                    seed_invariant: invariant,
                    cells: Vec::new(),
                });
                jobs.len() - 1
            });
            jobs[slot].cells.push((point, kind.ridge_beta()));
        }
    }
    jobs
}

/// Samples generated for a sweep: enough history for the deepest lookback,
/// and never less than `init_len` before the training window.
pub fn dataset_len(split: &SplitSpec, points: &[ModelKind]) -> usize {
    let lookback = points.iter().map(ModelKind::lookback).max().unwrap_or(0);
    split.required_len(lookback.max(split.init_len))
}

type CellOutput = (ResultRow, Option<PredictionResult>);

fn run_job(
    job: &Job,
    series: &SeriesFrame,
    split: &SplitSpec,
    baseline: &str,
    first_seed: u64,
) -> Vec<CellOutput> {
    let started = Instant::now();
    let betas: Vec<f64> = job.cells.iter().map(|&(_, b)| b).collect();
    let trained = train_many(series, split, &job.kind, &betas);
    let train_ms = started.elapsed().as_millis() as u64;
    job.cells
        .iter()
        .enumerate()
        .map(|(i, &(point, beta))| {
            let kind = job.kind.with_ridge_beta(beta);
            let mut row = ResultRow {
                dataset: series.tag.clone(),
                model: kind.name().to_string(),
                point,
                seed: job.seed,
                seed_invariant: job.seed_invariant,
                baseline: baseline.to_string(),
                mse: f64::INFINITY,
                diverged: false,
                error: String::new(),
                config: serde_json::to_string(&kind).expect("kinds serialize"),
                wall_ms: 0,
            };
            let t0 = Instant::now();
            let outcome = trained
                .as_ref()
                .map_err(Error::to_string)
                .and_then(|models| {
                    predict_closed_loop(&models[i], series, split).map_err(|e| e.to_string())
                });
            row.wall_ms = train_ms + t0.elapsed().as_millis() as u64;
            match outcome {
                Ok(p) => {
                    row.mse = p.mse;
                    row.diverged = p.diverged;
                    let keep = job.seed == first_seed || job.seed_invariant;
                    (row, keep.then_some(p))
                }
                Err(e) => {
                    row.error = e;
                    (row, None)
                }
            }
        })
        .collect()
}

/// Runs every (config point, seed) cell on `jobs` worker threads. Cell
/// failures become rows with an error message; only an invalid spec or an
/// unusable dataset fails the whole experiment.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentReport> {
    let points = spec.expand()?;
    let seeds = spec.seeds();
    let split = spec.dataset.split;
    let n = dataset_len(&split, &points);
    let series = generate(&spec.dataset.params(), &spec.dataset.integrator, n)
        .map_err(|e| Error::SpecInvalid(format!("dataset: {e}")))?;

    let work = plan(&points, &seeds);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outputs: Vec<CellOutput> = pool.install(|| {
        work.par_iter()
            .flat_map_iter(|job| run_job(job, &series, &split, &spec.baseline, seeds[0]))
            .collect()
    });

    let mut report = ExperimentReport {
        name: spec.name.clone(),
        rows: Vec::with_capacity(outputs.len()),
        predictions: BTreeMap::new(),
    };
    for (row, pred) in outputs {
        if let Some(p) = pred {
            report.predictions.insert(row.point, p);
        }
        report.rows.push(row);
    }
    report.sort();
    Ok(report)
}
