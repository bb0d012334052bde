use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pnt_core::data::SyntheticSpec;
use pnt_core::solver::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "pnt", version, about = "Inexact proximal Newton-type solver for l1-regularized problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one l1-logistic problem and write the iteration trace as CSV.
    Solve(SolveArgs),
    /// Sweep rho and TOL, compare with the proximal gradient baseline.
    Bench(BenchArgs),
    /// Fit the convergence order of a residual column in a trace CSV.
    Rates(RatesArgs),
    /// Sample the residual bounds on a bundled problem with known solution set.
    CheckProps(CheckPropsArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DataSource {
    /// LIBSVM file.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Synthetic data, e.g. `N=200,n=50,seed=7`. Optional keys: sparsity,
    /// density, noise.
    #[arg(long, value_name = "K=V,...")]
    pub synthetic: Option<String>,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub source: DataSource,
    /// Feature count for `--data`; defaults to the largest index in the file.
    #[arg(long, value_name = "N")]
    pub n_features: Option<usize>,
    /// Weight of the l1 penalty.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Keep the feature rows as read instead of scaling them to unit norm.
    #[arg(long)]
    pub no_normalize: bool,
    /// Starting point, whitespace or comma separated. Defaults to zero.
    #[arg(long, value_name = "FILE")]
    pub x0_file: Option<PathBuf>,
}

/// Overrides for the outer loop; unset flags keep the defaults.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Sufficient-decrease factor.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Residual contraction required for a unit step.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Backtracking factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Cap on the regularization weight alpha_k.
    #[arg(long)]
    pub alpha_bar: Option<f64>,
    /// Multiplier in alpha_k = min(alpha_bar, c ||G||^rho).
    #[arg(long = "c")]
    pub c_alpha: Option<f64>,
    /// Objective ceiling for unit steps (default 2 F(x0)).
    #[arg(long)]
    pub c_bound: Option<f64>,
    /// Forcing-term scale.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Forcing-term exponent (default rho).
    #[arg(long)]
    pub varrho: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    #[arg(long)]
    pub max_backtracks: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, rho: f64, tol: f64) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            theta: self.theta.unwrap_or(d.theta),
            sigma: self.sigma.unwrap_or(d.sigma),
            gamma: self.gamma.unwrap_or(d.gamma),
            c_bound: self.c_bound,
            alpha_bar: self.alpha_bar.unwrap_or(d.alpha_bar),
            c_alpha: self.c_alpha.unwrap_or(d.c_alpha),
            rho,
            nu: self.nu.unwrap_or(d.nu),
            varrho: self.varrho,
            tol,
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            max_inner: self.max_inner.unwrap_or(d.max_inner),
            max_backtracks: self.max_backtracks.unwrap_or(d.max_backtracks),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Trace CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
    pub rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-4,1e-5,1e-6,1e-7,1e-8")]
    pub tol: Vec<f64>,
    /// Step of the baseline; defaults to 1/L1.
    #[arg(long)]
    pub pgm_step: Option<f64>,
    /// Iteration cap of the baseline.
    #[arg(long, default_value_t = 100_000)]
    pub pgm_max_iter: usize,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Table CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Trace CSV produced by `solve`.
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, default_value = "g_norm")]
    pub column: String,
    /// Also write a one-row report CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckPropsArgs {
    /// Bundled problem id; `--list` prints the available ids.
    #[arg(long, required_unless_present = "list")]
    pub problem: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Length of the divergent sequence for problems whose solution set is a ray.
    #[arg(long, default_value_t = 20)]
    pub witness_steps: usize,
    /// Report CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parses `N=200,n=50,seed=7[,sparsity=..][,density=..][,noise=..]`.
pub fn parse_synthetic(text: &str) -> anyhow::Result<SyntheticSpec> {
    let (mut big_n, mut small_n, mut seed) = (None, None, None);
    let mut spec = SyntheticSpec::new(1, 1, 0);
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').with_context(|| format!("expected K=V, got {part:?}"))?;
        let bad = || format!("bad value for {key}: {value:?}");
        match key.trim() {
            "N" => big_n = Some(value.parse::<usize>().with_context(bad)?),
            "n" => small_n = Some(value.parse::<usize>().with_context(bad)?),
            "seed" => seed = Some(value.parse::<u64>().with_context(bad)?),
            "sparsity" => spec.sparsity = value.parse().with_context(bad)?,
            "density" => spec.density = value.parse().with_context(bad)?,
            "noise" => spec.noise = value.parse().with_context(bad)?,
            other => bail!("unknown synthetic key {other:?}"),
        }
    }
    match (big_n, small_n) {
        (Some(a), Some(b)) => {
            spec.n_samples = a;
            spec.n_features = b;
        }
        _ => bail!("synthetic spec needs both N and n"),
    }
    spec.seed = seed.unwrap_or(0);
    Ok(spec)
}
