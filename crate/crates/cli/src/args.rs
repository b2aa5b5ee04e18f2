use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gammalasso", version, about = "Design-matrix gamma index, certified LASSO and augmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Coherence, sandwich bounds, gamma estimate and the nu condition for a design
    Audit(AuditArgs),
    /// Plain LASSO fit
    Fit(FitArgs),
    /// LASSO fit on the design augmented with a random sphere block
    FitAug(FitAugArgs),
    /// Gamma index: Monte-Carlo estimate, or certified bracket with --epsilon (n <= 3)
    Gamma(GammaArgs),
    /// Run a seeded verification suite
    Verify(VerifyArgs),
    /// Prediction-error experiment for the plain and augmented LASSO
    Experiment(ExperimentArgs),
}

/// Output paths are not echoed into reports, so reruns to different files stay byte-identical.
#[derive(Args, Debug, Clone)]
pub struct Output {
    /// JSON report path (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Solver {
    /// KKT residual tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-sweeps", default_value_t = 100_000)]
    pub max_sweeps: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AuditArgs {
    /// Design matrix CSV (headerless, one row per observation)
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub rho: f64,
    /// Sparsity budget ratio (default s/n)
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    /// Outer-set multiplier (default e^2)
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Also compute a certified bracket with this net radius (n <= 3)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Rescale columns to unit norm before auditing
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Response vector CSV (one value per line)
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: Solver,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitAugArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Sparsity used for the coherence proxy of sigma_min
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Sparsity budget ratio (default s/n)
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "L", default_value_t = 0.5)]
    pub l: f64,
    /// Override the coherence proxy for sigma*_min
    #[arg(long = "sigma-min-star")]
    pub sigma_min_star: Option<f64>,
    /// Override the coherence proxy for sigma*_max
    #[arg(long = "sigma-max-star")]
    pub sigma_max_star: Option<f64>,
    /// Force the block width instead of choosing it
    #[arg(long)]
    pub p0: Option<usize>,
    #[arg(long = "p0-cap", default_value_t = 1_000_000)]
    pub p0_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: Solver,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GammaArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub rho: f64,
    /// Net radius for the certified bracket (n <= 3); omit for Monte Carlo
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    DotLaw,
    OrderStat,
    Gamma,
    Coherence,
    Norm,
    Extraction,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub p0: usize,
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Directions per gamma estimate (gamma suite)
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-trial table
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Sphere,
    CorrelatedPairs,
    User,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    pub design: DesignKind,
    /// Rows (ignored for --design user)
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns (ignored for --design user)
    #[arg(long)]
    pub p: Option<usize>,
    /// Design CSV for --design user
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Fixed lambda; omit to use the theorem rule
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "L", default_value_t = 0.5)]
    pub l: f64,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    #[arg(long = "p0-cap", default_value_t = 1_000_000)]
    pub p0_cap: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: Solver,
    /// Per-trial table
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}
