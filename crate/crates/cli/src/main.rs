mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use config::{CliOverrides, RunConfig};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ckn-lab",
    version,
    about = "Weighted Hardy/CKN inequality laboratory for block-radial functions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON config file; flags override its fields
    #[arg(long, env = "CKNLAB_CONFIG")]
    config: Option<std::path::PathBuf>,
    /// Block dimensions, comma separated (e.g. 2,2)
    #[arg(long, env = "CKNLAB_GAMMAS")]
    gammas: Option<String>,
    /// Lebesgue exponent q
    #[arg(long, env = "CKNLAB_Q")]
    q: Option<f64>,
    /// Target exponent p
    #[arg(long, env = "CKNLAB_P")]
    p: Option<f64>,
    /// Weight parameter α
    #[arg(long, env = "CKNLAB_ALPHA")]
    alpha: Option<f64>,
    /// Weight parameter β
    #[arg(long, env = "CKNLAB_BETA")]
    beta: Option<f64>,
    /// Nodes per grid axis
    #[arg(long, env = "CKNLAB_NODES")]
    nodes: Option<usize>,
    /// Inner truncation radius
    #[arg(long, env = "CKNLAB_RMIN")]
    rmin: Option<f64>,
    /// Outer truncation radius
    #[arg(long, env = "CKNLAB_RMAX")]
    rmax: Option<f64>,
    /// Refinement levels for convergence tables
    #[arg(long, env = "CKNLAB_LEVELS")]
    levels: Option<usize>,
    /// Solver tolerance
    #[arg(long, env = "CKNLAB_TOL")]
    tol: Option<f64>,
    /// Output directory for CSV + JSON reports
    #[arg(long, env = "CKNLAB_OUT")]
    out: Option<std::path::PathBuf>,
    /// k sweep, comma separated (counterexample)
    #[arg(long, env = "CKNLAB_K_LIST")]
    k_list: Option<String>,
    /// α sweep, comma separated (supersolution / angular)
    #[arg(long, env = "CKNLAB_ALPHA_LIST")]
    alpha_list: Option<String>,
    /// β sweep, comma separated (constant sweeps)
    #[arg(long, env = "CKNLAB_BETA_LIST")]
    beta_list: Option<String>,
    /// Radial center of the concentrating sequence
    #[arg(long, env = "CKNLAB_R_O")]
    r_o: Option<f64>,
    /// θ nodes for the angular eigenproblem
    #[arg(long, env = "CKNLAB_THETA_NODES")]
    theta_nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Field file (JSON header + CSV body)
    field: std::path::PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic bound and numerical best-constant estimate with a
    /// three-level convergence table
    Constant(CommonArgs),
    /// Evaluate all functionals and inequality ratios on a stored field
    Verify(FieldArgs),
    /// Reproduce the concentrating-sequence estimates over a k sweep
    Counterexample(CommonArgs),
    /// Supersolution certificate over an α sweep
    Supersolution(CommonArgs),
    /// Rearrangement checks on a stored field
    Rearrange(FieldArgs),
    /// Angular best constant over an α sweep
    Angular(CommonArgs),
}

/// Exit codes: 0 success, 2 input error, 3 numerical failure.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<ckn_core::Error> for CliError {
    fn from(e: ckn_core::Error) -> Self {
        use ckn_core::Error as E;
        match e {
            E::DidNotConverge(_) | E::SupersolutionViolation(_) | E::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Constant(args) => run(&args, report::cmd_constant),
        Cmd::Verify(args) => run_field(&args, report::cmd_verify),
        Cmd::Counterexample(args) => run(&args, report::cmd_counterexample),
        Cmd::Supersolution(args) => run(&args, report::cmd_supersolution),
        Cmd::Rearrange(args) => run_field(&args, report::cmd_rearrange),
        Cmd::Angular(args) => run(&args, report::cmd_angular),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(
    args: &CommonArgs,
    f: impl Fn(&RunConfig) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args.config.as_deref(), &CliOverrides::from_args(args))?;
    f(&cfg)
}

fn run_field(
    args: &FieldArgs,
    f: impl Fn(&RunConfig, &std::path::Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(
        args.common.config.as_deref(),
        &CliOverrides::from_args(&args.common),
    )?;
    f(&cfg, &args.field)
}
