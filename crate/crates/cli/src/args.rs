use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadvar_core::cumulants::geometric_grid;
use quadvar_core::{CovarianceModel, Exponent, SpectralDensity};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "quadvar",
    version,
    about = "Cumulants, convergence rates and limit laws of quadratic variations of stationary Gaussian sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact third and fourth cumulants of F_n over an n grid.
    Cumulants(CumulantsArgs),
    /// Rate regime of (H, beta) and the scan of |kappa3| / M_n.
    Rates(RatesArgs),
    /// Covariances of the log-modulated spectral density against their asymptotics.
    Spectral(SpectralArgs),
    /// Monte Carlo statistics of F_n from exact Gaussian paths.
    Simulate(SimulateArgs),
    /// Finite-grid approximation of the second-chaos limit law.
    Rosenblatt(RosenblattArgs),
    /// Three-term L2 bound and the total-variation rate it implies.
    Tvbound(TvboundArgs),
    /// Merge JSON outputs of other commands into one document.
    Report(ReportArgs),
}

impl Command {
    /// Tables by default for scans, documents for sampling runs and reports.
    pub fn default_format(&self) -> Format {
        match self {
            Command::Simulate(_) | Command::Rosenblatt(_) | Command::Report(_) => Format::Json,
            _ => Format::Csv,
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Cumulants(a) => &a.output,
            Command::Rates(a) => &a.output,
            Command::Spectral(a) => &a.output,
            Command::Simulate(a) => &a.output,
            Command::Rosenblatt(a) => &a.output,
            Command::Tvbound(a) => &a.output,
            Command::Report(a) => &a.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Defaults to csv for scans and json for simulate, rosenblatt and report.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Fgn,
    Iid,
    Table,
    LogPower,
    Spectral,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelChoice::Fgn)]
    pub model: ModelChoice,
    /// Hurst parameter.
    #[arg(long = "H", value_name = "H")]
    pub hurst: Option<String>,
    /// Logarithmic exponent.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub beta: String,
    /// Covariance table, one value per line starting at lag 0.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Negative sign for the log-power model.
    #[arg(long)]
    pub negative: bool,
}

impl ModelArgs {
    pub fn hurst_exponent(&self) -> CliResult<Exponent> {
        let raw = self
            .hurst
            .as_deref()
            .ok_or_else(|| CliError::Domain("--H is required for this model".into()))?;
        Ok(raw.parse()?)
    }

    pub fn hurst(&self) -> CliResult<f64> {
        Ok(self.hurst_exponent()?.value())
    }

    pub fn beta_exponent(&self) -> CliResult<Exponent> {
        Ok(self.beta.parse()?)
    }

    pub fn beta(&self) -> CliResult<f64> {
        Ok(self.beta_exponent()?.value())
    }

    /// Builds the model; `len` bounds the lags a spectral table must cover.
    pub fn build(&self, len: usize) -> CliResult<CovarianceModel> {
        Ok(match self.model {
            ModelChoice::Fgn => CovarianceModel::fgn(self.hurst()?)?,
            ModelChoice::Iid => CovarianceModel::iid(),
            ModelChoice::Table => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::Domain("--table is required for the table model".into()))?;
                CovarianceModel::from_table_file(path)?
            }
            ModelChoice::LogPower => CovarianceModel::log_power(self.hurst()?, self.beta()?, self.negative)?,
            ModelChoice::Spectral => {
                let density = SpectralDensity::log_modulated(self.hurst()?, self.beta()?)?;
                CovarianceModel::from_spectral(&density, len.max(2))?
            }
        })
    }
}

/// `start:stop:xF` (geometric) or a comma-separated list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Domain(format!("bad n grid {spec:?}; expected start:stop:xF or a,b,c"));
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad());
        };
        let start: usize = start.parse().map_err(|_| bad())?;
        let stop: usize = stop.parse().map_err(|_| bad())?;
        let factor: usize = step.strip_prefix('x').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if start == 0 || factor < 2 || stop < start {
            return Err(bad());
        }
        geometric_grid(start, stop, factor)
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<CliResult<Vec<_>>>()?
    };
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Domain(format!("n grid {spec:?} must be positive and strictly increasing")));
    }
    Ok(grid)
}

#[derive(Debug, Args)]
pub struct CumulantsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "64:65536:x2")]
    pub n_grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "256:65536:x2")]
    pub n_grid: String,
    /// Take the covariance model from --model instead of the default for (H, beta).
    #[arg(long)]
    pub explicit_model: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long = "H", value_name = "H")]
    pub hurst: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Lags at which the covariance is evaluated.
    #[arg(long, default_value = "100:10000:x10")]
    pub k_grid: String,
    /// Path lengths for the n v_n comparison (H > 3/4 only).
    #[arg(long)]
    pub n_grid: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Worker threads; results do not depend on this value.
    #[arg(long, env = "QUADVAR_WORKERS")]
    pub workers: Option<usize>,
}

impl WorkerArgs {
    pub fn resolve(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub workers: WorkerArgs,
    /// Also store the sampled paths in this binary file.
    #[arg(long)]
    pub save_paths: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RosenblattArgs {
    #[arg(long = "H", value_name = "H")]
    pub hurst: f64,
    /// Positive frequency nodes of the grid.
    #[arg(long = "M", value_name = "M", default_value_t = 256)]
    pub half_size: usize,
    /// Samples to draw; 0 reports analytic cumulants only.
    #[arg(long, default_value_t = 0)]
    pub paths: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Compare with the exact cumulants of F_n for fGn at this n.
    #[arg(long)]
    pub compare_n: Option<usize>,
    #[command(flatten)]
    pub workers: WorkerArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TvboundArgs {
    #[arg(long = "H", value_name = "H")]
    pub hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Constant of the L2-to-total-variation inequality (unknown; 1 reports the bound up to it).
    #[arg(long, default_value_t = 1.0)]
    pub c_finf: f64,
    #[arg(long, default_value = "256:65536:x2")]
    pub n_grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON outputs of earlier commands.
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
