use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mg_lab_core::harness::{
    emit_report, format_real, run_experiment, summarize_results_csv, write_dataset, ExperimentSpec,
    Summary,
};
use mg_lab_core::{Error, IntegratorConfig, MackeyGlassParams};

const DEFAULT_OUT: &str = "mg_lab_out";

#[derive(Parser, Debug)]
#[command(author, version, about = "Mackey-Glass reservoir-computing benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate Mackey-Glass and write <out>/mg_tau<tau>.csv plus a sidecar JSON.
    Generate(GenerateArgs),
    /// Run a spec with a single config point per model entry.
    Run(ExperimentArgs),
    /// Run a spec whose list-valued fields are sweep axes.
    Sweep(ExperimentArgs),
    /// Rebuild summary.json from an existing results.csv.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    internal_dt: Option<f64>,
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    history: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's output_dir and MG_LAB_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replaces the spec's seeds with consecutive values from this base.
    #[arg(long)]
    seed_base: Option<u64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A results.csv, or a directory containing one.
    #[arg(long)]
    results: PathBuf,
    /// Where summary.json goes; defaults to the directory of results.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Spec(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Spec(e.to_string())
        }
    }
}

fn out_dir(flag: Option<PathBuf>, from_spec: Option<&Path>) -> PathBuf {
    flag.or_else(|| from_spec.map(Path::to_path_buf))
        .or_else(|| std::env::var_os("MG_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let d = IntegratorConfig::default();
    let integrator = IntegratorConfig {
        internal_dt: args.internal_dt.unwrap_or(d.internal_dt),
        sample_dt: args.sample_dt.unwrap_or(d.sample_dt),
        warmup_samples: args.warmup.unwrap_or(d.warmup_samples),
        history_value: args.history.unwrap_or(d.history_value),
    };
    let dir = out_dir(args.out, None);
    let w = write_dataset(
        &dir,
        &MackeyGlassParams::standard(args.tau),
        &integrator,
        args.samples,
    )?;
    println!("{}", w.csv.display());
    println!("{}", w.sidecar.display());
    Ok(())
}

fn print_summary(s: &Summary) {
    for b in &s.best {
        let rel = b
            .relative_improvement_pct
            .map(|r| format!("  {r:+.2}% vs {}", s.baseline.as_deref().unwrap_or("?")))
            .unwrap_or_default();
        println!(
            "best {:<9} point {:<5} mean mse {}{rel}",
            b.model,
            b.point,
            format_real(b.mean_mse)
        );
    }
}

fn experiment(args: ExperimentArgs, sweep: bool) -> Result<(), Failure> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    if !sweep && spec.has_axes() {
        return Err(Failure::Spec(format!(
            "{} has list-valued fields; use `sweep` for grids",
            args.spec.display()
        )));
    }
    if let Some(base) = args.seed_base {
        if let Some(seeds) = &spec.seeds {
            let k = seeds.len() as u64;
            spec.seeds = Some((0..k).map(|i| base.wrapping_add(i)).collect());
        }
        spec.seed_base = base;
    }
    let dir = out_dir(args.out, spec.output_dir.as_deref());
    let report = run_experiment(&spec, args.jobs)?;
    emit_report(&report, &dir)?;
    print_summary(&report.summary());
    println!("wrote {}", dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let results = if args.results.is_dir() {
        args.results.join("results.csv")
    } else {
        args.results
    };
    let dir = args.out.unwrap_or_else(|| {
        results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let summary = summarize_results_csv(&results, &dir)?;
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => experiment(a, false),
        Command::Sweep(a) => experiment(a, true),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("io error: {m}");
            ExitCode::from(2)
        }
    }
}
