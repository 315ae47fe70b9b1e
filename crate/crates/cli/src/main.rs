use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psdfilter::bench::{rows_to_csv, run_suite, BenchSuite};
use psdfilter::datasets::{DatasetFamily, DatasetSpec};
use psdfilter::densemat::{io, symmetrize, Precision, PrecisionMode, SymmetricMatrix};
use psdfilter::design::{sequential_remez, CompositeFilter};
use psdfilter::golden;
use psdfilter::projection::{project_psd, ProjectionConfig, Stabilization};
use psdfilter::refine::{
    e_float_full, e_float_grid, refine_with_report, ErrorCertificate, RefineConfig, SampleGrid, Smoothing,
    DEFAULT_GRID_SIZE, DEFAULT_MAX_ITERS, DEFAULT_STEP,
};
use psdfilter::sdp::{maxcut_sdp, solve, Projector, SdpProblem, SolveSchedule};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] psdfilter::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "psdfilter",
    version,
    about = "PSD cone projection with composite polynomial filters"
)]
struct Cli {
    /// Seed for every randomized step (Lanczos start vectors, generators).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a composite filter by sequential minimax approximation.
    Design(DesignArgs),
    /// Gradient-refine a coefficient file and certify the result.
    Refine(RefineArgs),
    /// Certify the maximum ReLU error of a coefficient file.
    EvalError(EvalArgs),
    /// Project a symmetric matrix onto the PSD cone.
    Project(ProjectArgs),
    /// Run a benchmark suite and write CSV rows.
    Bench(BenchArgs),
    /// Solve an SDP with ADMM, optionally warm-started in low precision.
    SdpSolve(SdpArgs),
    /// Write a synthetic test matrix.
    GenMatrix(GenArgs),
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Number of stages.
    #[arg(long = "T", short = 'T', value_parser = clap::value_parser!(u32).range(1..))]
    stages: u32,
    /// Degree of every stage.
    #[arg(long, default_value_t = 5, conflicts_with = "degrees")]
    degree: usize,
    /// Per-stage degrees, comma separated; overrides --degree.
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
}

#[derive(Args)]
struct RefineArgs {
    /// Coefficient file, or `half` / `single` for the shipped stage-I sets.
    input: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long, default_value_t = 0.1)]
    final_step_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, default_value_t = 1000)]
    hard_max_tail: usize,
    /// Use the argmax subgradient throughout instead of the p-norm schedule.
    #[arg(long)]
    hard_max: bool,
    /// Certificate path; defaults to the output path with `.cert.json`.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Certify on a mixed grid of this size instead of every float32.
    #[arg(long)]
    cert_grid: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Coefficient file, or one of `half`, `single`, `half-refined`, `single-refined`.
    input: String,
    #[arg(long, conflicts_with = "grid")]
    full_enum: bool,
    /// Mixed grid of this many points.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StabilizationArg {
    None,
    Half,
    Single,
}

#[derive(Args)]
struct ProjectArgs {
    /// Matrix as CSV or the binary container.
    matrix: PathBuf,
    /// Coefficient file, or `half` / `single` for the refined sets.
    #[arg(long, default_value = "single")]
    coeffs: String,
    /// f64, f32 or f16emu.
    #[arg(long, default_value = "f64")]
    mode: String,
    /// Defaults to the customary choice for the mode.
    #[arg(long, value_enum)]
    stabilization: Option<StabilizationArg>,
    /// Accept a nonsymmetric input by replacing it with `(A + A^T) / 2`.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long, default_value_t = psdfilter::spectral::DEFAULT_LANCZOS_STEPS)]
    lanczos_steps: usize,
    /// Report path; stderr when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite JSON: datasets, methods, optional seeds and runs.
    suite: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarmArg {
    None,
    Half,
    Single,
}

#[derive(Args)]
struct SdpArgs {
    /// Problem JSON (`n`, `m`, `C`, `A`, `b`).
    #[arg(required_unless_present = "maxcut")]
    problem: Option<PathBuf>,
    /// Build the max-cut relaxation of this weight matrix instead.
    #[arg(long, conflicts_with = "problem")]
    maxcut: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    warm: WarmArg,
    /// Surrogate level that ends the warm phase; `inf` never switches.
    #[arg(long, default_value_t = 1e-2)]
    warm_threshold: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// gaussian_sym, dominant_plus_tiny, clustered_pm1 or rank_deficient.
    #[arg(long, required_unless_present = "spec")]
    family: Option<String>,
    #[arg(long, required_unless_present = "spec")]
    n: Option<usize>,
    /// Full dataset spec as JSON, e.g. for a prescribed spectrum.
    #[arg(long, conflicts_with_all = ["family", "n"])]
    spec: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    let seed = cli.seed;
    match cli.command {
        Command::Design(a) => design(a, out),
        Command::Refine(a) => refine(a, out, seed),
        Command::EvalError(a) => eval_error(a, out),
        Command::Project(a) => project(a, out, seed),
        Command::Bench(a) => bench(a, out, seed),
        Command::SdpSolve(a) => sdp_solve(a, out, seed),
        Command::GenMatrix(a) => gen_matrix(a, out, seed),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

/// Shipped names resolve to embedded files; anything else is a path.
fn load_filter(name: &str, shipped_default: bool) -> Result<CompositeFilter> {
    Ok(match name {
        "half" if shipped_default => golden::half_stage1(),
        "single" if shipped_default => golden::single_stage1(),
        "half" | "half-refined" => golden::half_refined(),
        "single" | "single-refined" => golden::single_refined(),
        "half-stage1" => golden::half_stage1(),
        "single-stage1" => golden::single_stage1(),
        path => CompositeFilter::from_json(&read_file(Path::new(path))?)?,
    })
}

fn design(a: DesignArgs, out: Option<&Path>) -> Result<()> {
    let t = a.stages as usize;
    let degrees = match a.degrees {
        Some(d) if d.len() != t => {
            return Err(CliError::Usage(format!("{} degrees given for T = {t}", d.len())));
        }
        Some(d) => d,
        None => vec![a.degree; t],
    };
    let filter = sequential_remez(t, &degrees, a.epsilon)?;
    emit(out, &filter.to_json())
}

fn refine(a: RefineArgs, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let out = out.ok_or_else(|| CliError::Usage("refine needs --out for the coefficient file".into()))?;
    let input = load_filter(&a.input, true)?;
    let mut config = RefineConfig::new(SampleGrid::mixed(a.grid_size)?);
    config.max_iters = a.max_iters;
    config.step_size = a.step;
    config.final_step_ratio = a.final_step_ratio;
    config.hard_max_tail = a.hard_max_tail;
    config.seed = seed.unwrap_or(0);
    if a.hard_max {
        config.smoothing = Smoothing::HardMaxSubgradient;
    }
    let outcome = refine_with_report(&input, &config)?;
    if outcome.diverged {
        eprintln!("warning: refinement stopped early; keeping the best iterate seen");
    }
    write_file(out, &outcome.filter.to_json())?;
    let cert = certify(&outcome.filter, a.cert_grid)?;
    let cert_path = a.cert.unwrap_or_else(|| out.with_extension("cert.json"));
    write_file(&cert_path, &cert.to_json())?;
    eprintln!(
        "grid loss {:.6e} -> {:.6e}; e_float {:.6e} at x = {}",
        outcome.initial_loss, outcome.final_loss, cert.e_value, cert.argmax_x
    );
    Ok(())
}

fn certify(filter: &CompositeFilter, grid: Option<usize>) -> Result<ErrorCertificate> {
    Ok(match grid {
        Some(n) => e_float_grid(filter, &SampleGrid::mixed(n)?),
        None => e_float_full(filter),
    })
}

fn eval_error(a: EvalArgs, out: Option<&Path>) -> Result<()> {
    let filter = load_filter(&a.input, true)?;
    let grid = if a.full_enum { None } else { a.grid };
    let cert = certify(&filter, grid)?;
    emit(out, &format!("{}\n", cert.to_json()))
}

fn project(a: ProjectArgs, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let raw = io::read_matrix(&a.matrix)?;
    let x = if a.symmetrize {
        symmetrize(&raw)?
    } else {
        SymmetricMatrix::new(raw)?
    };
    let filter = load_filter(&a.coeffs, false)?;
    let mode = PrecisionMode::new(a.mode.parse::<Precision>()?);
    let mut config = ProjectionConfig::new(filter, mode);
    if let Some(s) = a.stabilization {
        config.stabilization = match s {
            StabilizationArg::None => Stabilization::None,
            StabilizationArg::Half => Stabilization::HalfStyle,
            StabilizationArg::Single => Stabilization::SingleStyle,
        };
    }
    config.lanczos_steps = a.lanczos_steps;
    config.seed = seed.unwrap_or(0);
    let (p, report) = project_psd(&x, &config)?;
    match out {
        Some(path) => io::write_matrix(p.as_matrix(), path)?,
        None => emit(None, &io::to_csv(p.as_matrix()))?,
    }
    let report = serde_json::to_string_pretty(&report)?;
    match a.report {
        Some(path) => write_file(&path, &report),
        None => {
            eprintln!("{report}");
            Ok(())
        }
    }
}

fn bench(a: BenchArgs, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut suite = BenchSuite::from_json(&read_file(&a.suite)?)?;
    if let (Some(s), None) = (seed, &suite.seeds) {
        suite.seeds = Some(vec![s]);
    }
    let rows = run_suite(&suite)?;
    emit(out, &rows_to_csv(&rows))
}

fn sdp_solve(a: SdpArgs, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (problem, maxcut) = match (&a.problem, &a.maxcut) {
        (Some(p), _) => (SdpProblem::from_json(&read_file(p)?)?, false),
        (None, Some(w)) => (maxcut_sdp(&SymmetricMatrix::new(io::read_matrix(w)?)?)?, true),
        (None, None) => return Err(CliError::Usage("give a problem file or --maxcut".into())),
    };
    let filter_config = |mut c: ProjectionConfig| {
        c.seed = seed.unwrap_or(0);
        Projector::Filter(Box::new(c))
    };
    let warm = match a.warm {
        WarmArg::None => None,
        WarmArg::Half => Some(filter_config(ProjectionConfig::half(golden::half_refined()))),
        WarmArg::Single => Some(filter_config(ProjectionConfig::single(golden::single_refined()))),
    };
    let schedule = SolveSchedule {
        warm_projector: warm,
        warm_threshold: a.warm_threshold,
        final_tol: a.tol,
        max_iters: a.max_iters,
        sigma_penalty: a.sigma,
    };
    let (state, trace) = match solve(&problem, &schedule) {
        Ok(r) => r,
        Err(psdfilter::Error::Diverged {
            iteration,
            residual,
            trace,
        }) => {
            if let Some(path) = &a.trace {
                write_file(path, &trace.to_csv())?;
            }
            return Err(psdfilter::Error::Diverged {
                iteration,
                residual,
                trace,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.trace {
        write_file(path, &trace.to_csv())?;
    }
    let kkt = psdfilter::sdp::kkt_residual(&problem, &state)?;
    let objective = problem.objective(&state.x);
    let mut summary = serde_json::json!({
        "objective": objective,
        "iterations": state.iteration,
        "converged": trace.converged,
        "switched_at": trace.switched_at,
        "eta": kkt.eta,
        "surrogate": kkt.surrogate,
        "y": state.y,
        "X": state.x.as_matrix().as_slice(),
    });
    if maxcut {
        summary["cut_value"] = serde_json::json!(-objective);
    }
    emit(out, &format!("{}\n", serde_json::to_string_pretty(&summary)?))
}

fn gen_matrix(a: GenArgs, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut spec: DatasetSpec = match (&a.spec, &a.family, a.n) {
        (Some(json), _, _) => serde_json::from_str(json)?,
        (None, Some(family), Some(n)) => {
            let family: DatasetFamily = serde_json::from_value(serde_json::json!({ "family": family }))
                .map_err(|_| CliError::Usage(format!("unknown or incomplete family '{family}'; use --spec")))?;
            DatasetSpec::new(family, n, 0)
        }
        _ => return Err(CliError::Usage("give --spec or both --family and --n".into())),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let x = spec.generate()?;
    match out {
        Some(path) => Ok(io::write_matrix(x.as_matrix(), path)?),
        None => emit(None, &io::to_csv(x.as_matrix())),
    }
}
