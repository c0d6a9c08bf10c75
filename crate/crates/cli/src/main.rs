//! `hrmt`: spherical functions, transforms, product densities, kernels, samples and
//! the acceptance runner from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// Numerical failure or failed validation; exit code 1.
    Failure(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o error: {e}"))
    }
}

impl From<harmonic_rmt::Error> for CliError {
    fn from(e: harmonic_rmt::Error) -> Self {
        use harmonic_rmt::Error as E;
        match e {
            E::InvalidArgument(_) | E::Dimension(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

// Aliases keep clap from treating comma lists as repeated flags.
type ComplexList = Vec<num_complex::Complex64>;
type RealList = Vec<f64>;
type ParityList = Vec<u8>;
type IdList = Vec<usize>;

#[derive(Parser, Debug)]
#[command(name = "hrmt", version, about = "Harmonic analysis of products g x g* of random matrices")]
pub struct Cli {
    /// Worker threads; defaults to RMT_THREADS, then to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate the spherical function Φ, the function Ψ or the constant C.
    Spherical(SphericalArgs),
    /// Mellin transform of a Pólya weight, or the spherical transform of its ensemble.
    Transform(TransformArgs),
    /// One-point density K(ã, ã)/r of the product on a grid, or the joint density at one point.
    Jpdf(GridArgs),
    /// Kernel K(ã₁, ã₂) of the product on a grid.
    Kernel(KernelArgs),
    /// Sample nonzero eigenvalues of g x g*.
    Sample(SampleArgs),
    /// Run acceptance criteria and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
#[group(id = "function", required = true, multiple = false)]
pub struct Which {
    /// Φ(s, L; a) for a signed spectrum a.
    #[arg(long)]
    pub phi: bool,
    /// Ψ(s; a) for a positive spectrum a.
    #[arg(long)]
    pub psi: bool,
    /// C_{l,n}(s), with n the length of s.
    #[arg(long = "c")]
    pub c: bool,
}

#[derive(Args, Debug)]
pub struct SphericalArgs {
    #[command(flatten)]
    pub which: Which,
    /// Comma-separated frequencies; complex values as `1+2i`.
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_complexes)]
    pub s: ComplexList,
    /// Comma-separated parities L_j ∈ {0, 1}; default all 0.
    #[arg(long = "L", value_parser = config::parse_parities)]
    pub parities: Option<ParityList>,
    /// Comma-separated eigenvalues.
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_reals)]
    pub a: Option<RealList>,
    /// Matrix size l for `--c`.
    #[arg(long)]
    pub l: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Recorded in the header; the transform is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight as inline JSON or a file path, e.g. '{"kind":"ginibre","nu":0}'.
    #[arg(long)]
    pub weight: String,
    /// Comma-separated Mellin arguments.
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_complexes)]
    pub s: ComplexList,
    /// Treat s as the frequency vector of the n-point Pólya ensemble and emit its spherical transform.
    #[arg(long)]
    pub ensemble: bool,
    /// Add a column computed by quadrature.
    #[arg(long, conflicts_with = "ensemble")]
    pub check: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpecArgs {
    /// Spec as inline JSON or a file path.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in the header; the densities themselves are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Absolute quadrature tolerance, overriding the spec file.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Relative quadrature tolerance, overriding the spec file.
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// min:max:points, endpoints included.
    #[arg(long, allow_hyphen_values = true, value_parser = config::Grid::parse, required_unless_present = "at")]
    pub grid: Option<config::Grid>,
    /// Evaluate the joint density of all r nonzero eigenvalues at this point instead.
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_reals, conflicts_with = "grid")]
    pub at: Option<RealList>,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Grid for ã₁ (and ã₂ unless --grid2 is given).
    #[arg(long, allow_hyphen_values = true, value_parser = config::Grid::parse)]
    pub grid: config::Grid,
    #[arg(long, allow_hyphen_values = true, value_parser = config::Grid::parse)]
    pub grid2: Option<config::Grid>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Spec as inline JSON or a file path.
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// core, all, acceptance, spherical, factorization, ensembles, product, analytic.
    #[arg(long, default_value = "core")]
    pub suite: String,
    /// Comma-separated criterion numbers; overrides --suite.
    #[arg(long, value_parser = parse_ids)]
    pub criteria: Option<IdList>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep wall-clock timings in the report, which makes it non-reproducible.
    #[arg(long)]
    pub timings: bool,
}

fn parse_ids(s: &str) -> Result<Vec<usize>, String> {
    config::parse_list(s, |x| x.parse::<usize>().map_err(|_| format!("`{x}` is not a criterion number")))
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RMT_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("RMT_THREADS = `{v}` is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Spherical(a) => commands::spherical(a),
        Command::Transform(a) => commands::transform(a),
        Command::Jpdf(a) => commands::jpdf(a),
        Command::Kernel(a) => commands::kernel(a),
        Command::Sample(a) => commands::sample(a),
        Command::Verify(a) => commands::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
