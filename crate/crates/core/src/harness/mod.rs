//! Experiment specs, sweeps and reports.

mod dataset;
mod report;
mod run;
mod spec;

pub use dataset::{write_dataset, DatasetInfo, WrittenDataset};
pub use report::{
    emit_report, format_real, read_results_csv, relative_improvement, summarize,
    summarize_results_csv, write_results_csv, BestPoint, ExperimentReport, PointSummary, ResultRow,
    Summary,
};
pub use run::{dataset_len, run_experiment};
pub use spec::{DatasetSpec, ExperimentSpec, DEFAULT_SEED_COUNT, DEFAULT_SWEEP_CAP};
