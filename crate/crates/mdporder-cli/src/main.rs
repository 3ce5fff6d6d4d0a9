//! Command-line front end: simulate datasets, estimate the order of a
//! logged decision process, run Monte Carlo studies, and export signal
//! curves for plotting.
//!
//! Exit codes: 0 on success, 1 on argument/validation errors, 2 on runtime
//! failures. All output files are byte-reproducible for identical arguments
//! and seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mdporder::ccf::backend::BackendSpec;
use mdporder::error::Error;
use mdporder::io::{read_dataset, write_dataset, Format};
use mdporder::mc::run_mc;
use mdporder::pipeline::{run_estimate, EstimateRun, EstimatorConfig};
use mdporder::signal::RidgeSchedule;
use mdporder::simulate::{simulate, Model, SimSpec};

#[derive(Parser)]
#[command(
    name = "mdporder",
    version,
    about = "Estimate the order of a Markov decision process from offline trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it to disk.
    Simulate(SimulateArgs),
    /// Estimate the order of a logged dataset; writes a JSON report.
    Estimate(EstimateArgs),
    /// Monte Carlo study: repeated simulate-then-estimate cycles.
    Mc(McArgs),
    /// Emit the signal curve of a dataset as two-column CSV (k, omega).
    Curve(CurveArgs),
}

#[derive(Args)]
struct SimShape {
    /// Generator: model1, model2, ohio, or iid.
    #[arg(long)]
    model: String,
    /// Number of trajectories.
    #[arg(long)]
    n: usize,
    /// Trajectory length.
    #[arg(long)]
    t: usize,
    /// State dimension (must be 3 for ohio).
    #[arg(long)]
    p: usize,
    /// Steps discarded before recording.
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    /// Override the innovation standard deviation (0 disables noise).
    #[arg(long)]
    noise_scale: Option<f64>,
}

impl SimShape {
    fn to_spec(&self, seed: u64) -> Result<SimSpec, Error> {
        let mut spec = SimSpec::new(Model::from_str(&self.model)?, self.n, self.t, self.p, seed);
        spec.burn_in = self.burn_in;
        spec.noise_scale_override = self.noise_scale;
        Ok(spec)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    shape: SimShape,
    #[arg(long)]
    seed: u64,
    /// Output path; format inferred from the extension unless --format is given.
    #[arg(long)]
    out: PathBuf,
    /// Dataset format: csv or ndjson.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EstimatorOpts {
    /// Largest candidate order K.
    #[arg(long, default_value_t = 6)]
    k_max: usize,
    /// Largest lag offset Q.
    #[arg(long, default_value_t = 5)]
    q_max: usize,
    /// Number of random direction pairs B [default: floor((NT)^(1/4))].
    #[arg(long)]
    b: Option<usize>,
    /// Power applied to the max statistics inside the signal ratio.
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    /// Decision threshold on the signal curve, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Ridge schedule constant c0.
    #[arg(long, default_value_t = 0.1)]
    ridge_c0: f64,
    /// Ridge schedule exponent a.
    #[arg(long, default_value_t = 1.0)]
    ridge_a: f64,
    /// Regression backend: forest or knn.
    #[arg(long, default_value = "forest")]
    backend: String,
    /// Trees per forest fit.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Minimum rows per leaf in forest fits.
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Neighborhood size for the knn backend [default: ceil(n^(2/3))].
    #[arg(long)]
    knn_k: Option<usize>,
    /// Worker threads [default: hardware concurrency]; the MDPORDER_THREADS
    /// environment variable overrides this flag.
    #[arg(long)]
    threads: Option<usize>,
}

impl EstimatorOpts {
    fn to_config(&self, seed: u64) -> Result<EstimatorConfig, Error> {
        let backend = match self.backend.as_str() {
            "forest" => BackendSpec::Forest {
                trees: self.trees,
                min_leaf: self.min_leaf,
            },
            "knn" => BackendSpec::Knn { k: self.knn_k },
            other => {
                return Err(Error::validation(format!(
                    "unknown backend {other:?} (expected forest or knn)"
                )))
            }
        };
        Ok(EstimatorConfig {
            k_max: self.k_max,
            q_max: self.q_max,
            num_directions: self.b,
            eta: self.eta,
            tau: self.tau,
            ridge: RidgeSchedule {
                c0: self.ridge_c0,
                a: self.ridge_a,
            },
            backend,
            seed,
        })
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Input dataset (csv or ndjson).
    #[arg(long)]
    data: PathBuf,
    /// Input format override.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the full deviation grid as CSV (columns k,q,b,value,count).
    #[arg(long)]
    dump_gamma: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorOpts,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    shape: SimShape,
    /// Number of repetitions.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Per-repetition CSV path; a summary JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Write real per-repetition wall-clock seconds into the CSV. Off by
    /// default so identical runs produce byte-identical files.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    estimator: EstimatorOpts,
}

#[derive(Args)]
struct CurveArgs {
    /// Input dataset (csv or ndjson).
    #[arg(long)]
    data: PathBuf,
    /// Input format override.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Output CSV path (header k,omega).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    estimator: EstimatorOpts,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here with success semantics.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => with_pool(args.estimator.threads, || cmd_estimate(args)),
        Command::Mc(args) => with_pool(args.estimator.threads, || cmd_mc(args)),
        Command::Curve(args) => with_pool(args.estimator.threads, || cmd_curve(args)),
    }
}

/// Run a closure in a rayon pool sized by MDPORDER_THREADS, the --threads
/// flag, or hardware concurrency, in that order of precedence.
fn with_pool<T>(
    flag: Option<usize>,
    body: impl FnOnce() -> Result<T, Error> + Send,
) -> Result<T, Error>
where
    T: Send,
{
    let from_env = std::env::var("MDPORDER_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>().map_err(|_| {
                Error::validation(format!("MDPORDER_THREADS must be an integer, got {v:?}"))
            })
        })
        .transpose()?;
    match from_env.or(flag) {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))?;
            pool.install(body)
        }
        Some(_) => Err(Error::validation("thread count must be >= 1".to_string())),
        None => body(),
    }
}

fn resolve_format(path: &Path, flag: &Option<String>) -> Result<Format, Error> {
    match flag {
        Some(f) => Format::from_str(f),
        None => Format::from_path(path).ok_or_else(|| {
            Error::validation(format!(
                "cannot infer format from {:?}; pass --format csv|ndjson",
                path
            ))
        }),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let spec = args.shape.to_spec(args.seed)?;
    let format = resolve_format(&args.out, &args.format)?;
    let dataset = simulate(&spec)?;
    write_dataset(&dataset, &args.out, format)?;
    println!(
        "wrote {} trajectories x {} steps (p = {}) to {}",
        dataset.num_trajectories(),
        dataset.t_len(),
        dataset.state_dim(),
        args.out.display()
    );
    Ok(())
}

fn load(data: &Path, format: &Option<String>) -> Result<mdporder::Dataset, Error> {
    let format = resolve_format(data, format)?;
    read_dataset(data, format)
}

fn write_gamma_csv(run: &EstimateRun, path: &Path) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "k,q,b,value,count")?;
    for cell in &run.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.k, cell.q, cell.b, cell.value, cell.summand_count
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let dataset = load(&args.data, &args.format)?;
    let config = args.estimator.to_config(args.seed)?;
    let run = run_estimate(&dataset, &config)?;

    let report = run.report();
    let mut out = BufWriter::new(File::create(&args.out)?);
    serde_json::to_writer_pretty(&mut out, &report).map_err(Error::from)?;
    writeln!(out)?;
    out.flush()?;

    if let Some(path) = &args.dump_gamma {
        write_gamma_csv(&run, path)?;
    }

    match report.k_hat {
        Some(k) => println!("estimated order: {k}"),
        None => println!("order undetermined (no signal value at or below tau)"),
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_mc(args: McArgs) -> Result<(), Error> {
    let spec = args.shape.to_spec(args.seed)?;
    let config = args.estimator.to_config(args.seed)?;
    let report = run_mc(&spec, &config, args.reps)?;

    let sidecar = args.out.with_extension("json");
    if sidecar == args.out {
        return Err(Error::validation(
            "mc --out should not end in .json; that path is reserved for the summary sidecar"
                .to_string(),
        ));
    }
    let mut csv = BufWriter::new(File::create(&args.out)?);
    report.write_csv(&mut csv, args.timing)?;
    csv.flush()?;
    std::fs::write(&sidecar, report.summary_json()? + "\n")?;

    println!(
        "{} reps of {} (true order {}): mean = {}, mse = {}",
        report.reps,
        report.model,
        report.k_true,
        report
            .mean
            .map_or("n/a".to_string(), |v| format!("{v:.3}")),
        report.mse.map_or("n/a".to_string(), |v| format!("{v:.3}")),
    );
    println!(
        "P(k_hat - k0 = 0) = {:.3}; undetermined = {:.3}; errors = {:.3}",
        report.bins.zero, report.bins.undetermined, report.bins.error
    );
    println!("total wall clock: {:.1}s", report.total_seconds);
    println!(
        "wrote {} and {}",
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<(), Error> {
    let dataset = load(&args.data, &args.format)?;
    let config = args.estimator.to_config(args.seed)?;
    let run = run_estimate(&dataset, &config)?;

    let mut out = BufWriter::new(File::create(&args.out)?);
    writeln!(out, "k,omega")?;
    for (i, omega) in run.order.curve.omega().iter().enumerate() {
        writeln!(out, "{},{}", i + 1, omega)?;
    }
    out.flush()?;
    println!("curve written to {}", args.out.display());
    Ok(())
}
