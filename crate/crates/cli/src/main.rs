//! `hsem`: sparse horseshoe regression from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad input, 3 non-convergence
//! under `--strict`, 4 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use horseshoe_em::io::{
    emit_shrinkage_profile, format_metrics_table, read_csv, write_fit, write_profile,
    write_simulation_report, CsvSelection, FitEcho, Grid, SimulationReport,
};
use horseshoe_em::models::{linear_fit, logistic_fit, normal_means_fit, ModelKind};
use horseshoe_em::parallel::Execution;
use horseshoe_em::sim::{run_replications_with, BetaPattern, SimModel, SimSpec};
use horseshoe_em::{EmConfig, Error, EstepMode, FitResult};

const EXIT_IO: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "hsem", version, about = "Sparse horseshoe posterior modes via EM")]
struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Run replicated synthetic experiments.
    Simulate(SimArgs),
    /// Emit the scalar shrinkage profile as CSV.
    Profile(ProfileArgs),
}

#[derive(Args, Debug, Default)]
struct EmFlags {
    #[arg(long)]
    estep: Option<EstepMode>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Final threshold is threshold_scale / sqrt(n).
    #[arg(long)]
    threshold_scale: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input CSV with a header row.
    input: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated feature columns (default: all but the target).
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 3 when EM hits max-iters without converging.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    em: EmFlags,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// normal-means or linear.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    n_pos: Option<usize>,
    #[arg(long)]
    n_neg: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Structured (JSON) report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run replicates on the calling thread only.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    em: EmFlags,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Global shrinkage τ in (0, 1).
    #[arg(long)]
    profile_tau: Option<f64>,
    /// lo:hi:step
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Grid>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    em: EmFlags,
}

/// Settings accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    model: Option<String>,
    estep: Option<String>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    threshold_scale: Option<f64>,
    seed: Option<u64>,
    target: Option<String>,
    features: Option<Vec<String>>,
    out: Option<PathBuf>,
    strict: Option<bool>,
    profile_tau: Option<f64>,
    grid: Option<String>,
    n: Option<usize>,
    p: Option<usize>,
    signal: Option<f64>,
    n_pos: Option<usize>,
    n_neg: Option<usize>,
    rho: Option<f64>,
    sigma_sq: Option<f64>,
    reps: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    NotConverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = Result<T, Failure>;

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::InvalidInput(msg.into()))
}

fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| bad(format!("config {}: {e}", path.display())))
}

fn parse_opt<T: std::str::FromStr<Err = Error>>(v: Option<&String>) -> CliResult<Option<T>> {
    v.map(|s| s.parse::<T>()).transpose().map_err(Failure::Lib)
}

fn em_config(flags: &EmFlags, file: &FileConfig) -> CliResult<EmConfig> {
    let defaults = EmConfig::default();
    let estep = match flags.estep {
        Some(m) => m,
        None => parse_opt(file.estep.as_ref())?.unwrap_or(defaults.estep_mode),
    };
    let config = EmConfig {
        tolerance: flags.tol.or(file.tol).unwrap_or(defaults.tolerance),
        max_iters: flags.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        threshold_scale: flags
            .threshold_scale
            .or(file.threshold_scale)
            .unwrap_or(defaults.threshold_scale),
        estep_mode: estep,
        ..defaults
    };
    config.validate()?;
    Ok(config)
}

fn open_out(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn check_out(path: Option<&PathBuf>) -> CliResult<()> {
    let Some(path) = path else { return Ok(()) };
    let parent = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", parent.display()),
        )
        .into());
    }
    if path.is_dir() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("output path {} is a directory", path.display()),
        )
        .into());
    }
    Ok(())
}

fn run_fit(args: FitArgs, file: FileConfig) -> CliResult<()> {
    let input = args
        .input
        .or(file.input.clone())
        .ok_or_else(|| bad("fit needs an input CSV path"))?;
    let model = match args.model {
        Some(m) => m,
        None => parse_opt(file.model.as_ref())?.unwrap_or(ModelKind::Linear),
    };
    let target = args
        .target
        .or(file.target.clone())
        .ok_or_else(|| bad("--target is required"))?;
    let features = match model {
        ModelKind::NormalMeans => Some(Vec::new()),
        _ => args.features.or(file.features.clone()),
    };
    let config = em_config(&args.em, &file)?;
    let strict = args.strict || file.strict.unwrap_or(false);
    let out = args.out.or(file.out.clone());
    check_out(out.as_ref())?;

    let table = read_csv(&input, &CsvSelection { target, features })?;
    eprintln!("read {} rows x {} features", table.rows(), table.cols());
    let names = table.feature_names.clone();
    let result: FitResult = match model {
        ModelKind::Linear => linear_fit(table.x.view(), table.y.view(), Some(&names), &config)?,
        ModelKind::Logistic => logistic_fit(table.x.view(), table.y.view(), Some(&names), &config)?,
        ModelKind::NormalMeans => normal_means_fit(table.y.view(), &config)?,
    };
    let names = match model {
        ModelKind::NormalMeans => (1..=result.beta.len()).map(|i| format!("mu{i}")).collect(),
        _ => names,
    };
    let echo = FitEcho {
        model,
        target: table.target_name.clone(),
        n: table.rows(),
        config,
    };
    let mut w = open_out(out.as_ref())?;
    write_fit(&mut w, &result, &names, &echo)?;
    w.flush()?;
    if strict && !result.converged {
        return Err(Failure::NotConverged(result.iters));
    }
    Ok(())
}

fn run_simulate(args: SimArgs, file: FileConfig) -> CliResult<()> {
    let model = match args.model.as_deref().or(file.model.as_deref()).unwrap_or("linear") {
        "linear" => SimModel::Linear,
        "normal-means" => SimModel::NormalMeans,
        other => return Err(bad(format!("simulate supports linear or normal-means, not '{other}'"))),
    };
    let base = match model {
        SimModel::Linear => SimSpec::linear(0.0, 1.0),
        SimModel::NormalMeans => SimSpec::normal_means(1000, 3.0),
    };
    let n = args.n.or(file.n).unwrap_or(base.n);
    let p = match model {
        SimModel::NormalMeans => args.p.or(file.p).unwrap_or(n),
        SimModel::Linear => args.p.or(file.p).unwrap_or(base.p),
    };
    let spec = SimSpec {
        model,
        n,
        p,
        pattern: BetaPattern {
            signal: args.signal.or(file.signal).unwrap_or(base.pattern.signal),
            n_pos: args.n_pos.or(file.n_pos).unwrap_or(base.pattern.n_pos),
            n_neg: args.n_neg.or(file.n_neg).unwrap_or(base.pattern.n_neg),
        },
        rho: args.rho.or(file.rho).unwrap_or(base.rho),
        sigma_sq: args.sigma_sq.or(file.sigma_sq).unwrap_or(base.sigma_sq),
        replications: args.reps.or(file.reps).unwrap_or(base.replications),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
    };
    let config = em_config(&args.em, &file)?;
    let out = args.out.or(file.out.clone());
    check_out(out.as_ref())?;
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let metrics = run_replications_with(&spec, &config, execution)?;
    print!("{}", format_metrics_table(&metrics));
    let report = SimulationReport {
        spec,
        config,
        metrics,
    };
    if let Some(path) = out {
        let mut w = open_out(Some(&path))?;
        write_simulation_report(&mut w, &report)?;
        w.flush()?;
    }
    Ok(())
}

fn run_profile(args: ProfileArgs, file: FileConfig) -> CliResult<()> {
    let tau = args
        .profile_tau
        .or(file.profile_tau)
        .ok_or_else(|| bad("--profile-tau is required"))?;
    let grid = match args.grid {
        Some(g) => g,
        None => parse_opt(file.grid.as_ref())?.unwrap_or(Grid {
            lo: -10.0,
            hi: 10.0,
            step: 0.05,
        }),
    };
    let config = em_config(&args.em, &file)?;
    let out = args.out.or(file.out.clone());
    check_out(out.as_ref())?;
    let profile = emit_shrinkage_profile(tau, grid, &config)?;
    let mut w = open_out(out.as_ref())?;
    write_profile(&mut w, &profile)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load_file_config(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Fit(a) => run_fit(a, file),
        Command::Simulate(a) => run_simulate(a, file),
        Command::Profile(a) => run_profile(a, file),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged(iters)) => {
            eprintln!("error: EM did not converge within {iters} iterations");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) => EXIT_IO,
                Error::Numerical { .. } | Error::Degenerate(_) => EXIT_NUMERICAL,
                e if e.is_input_error() => EXIT_BAD_INPUT,
                _ => EXIT_IO,
            };
            ExitCode::from(code)
        }
    }
}
