use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcmort_core::{Distribution, FitConfig, InclusiveRange, Sex};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "lcmort",
    version,
    about = "Fit, forecast and compare Lee-Carter family mortality models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Fit one model to an HMD deaths/exposures pair.
    Fit(FitArgs),
    /// Project the period index of a Lee-Carter fit and the implied rates.
    Forecast(ForecastArgs),
    /// Tabulate per-year residual sums of squares for two or more fits.
    Compare(CompareArgs),
    /// Export fitted and forecast log-rate curves for plotting.
    Curves(CurvesArgs),
    /// Re-run the command recorded in a run manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    #[value(name = "lc_poisson")]
    LcPoisson,
    #[value(name = "lc_negbin")]
    LcNegbin,
    #[value(name = "rh")]
    Rh,
    #[value(name = "plat")]
    Plat,
}

impl ModelArg {
    pub fn name(self) -> &'static str {
        match self {
            ModelArg::LcPoisson => "lc_poisson",
            ModelArg::LcNegbin => "lc_negbin",
            ModelArg::Rh => "rh",
            ModelArg::Plat => "plat",
        }
    }

    pub fn lee_carter_distribution(self) -> Option<Distribution> {
        match self {
            ModelArg::LcPoisson => Some(Distribution::Poisson),
            ModelArg::LcNegbin => Some(Distribution::NegativeBinomial),
            _ => None,
        }
    }
}

/// Input tables and the rectangle cut from them.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// HMD 1x1 deaths table (Deaths_1x1.txt).
    #[arg(long)]
    pub deaths: PathBuf,
    /// HMD 1x1 exposures table (Exposures_1x1.txt).
    #[arg(long)]
    pub exposures: PathBuf,
    #[arg(long, default_value = "female")]
    pub sex: Sex,
    /// Inclusive age range, LO:HI.
    #[arg(long, default_value = "0:100")]
    pub ages: InclusiveRange,
    /// Inclusive year range, LO:HI.
    #[arg(long)]
    pub years: InclusiveRange,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative log-likelihood change that ends the iteration.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Cohorts seen in fewer cells keep a zero cohort effect (rh, plat).
    #[arg(long, default_value_t = 1)]
    pub min_cohort_obs: usize,
}

impl FitOptions {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            max_iterations: self.max_iter,
            loglik_rel_tolerance: self.tol,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "lc_poisson")]
    pub model: ModelArg,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

/// Either a previous fit directory or the inputs for an inline fit.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// Directory written by `lcmort fit`.
    #[arg(long, conflicts_with_all = ["deaths", "exposures", "years"])]
    pub from: Option<PathBuf>,
    #[arg(long, requires_all = ["exposures", "years"])]
    pub deaths: Option<PathBuf>,
    #[arg(long, requires = "deaths")]
    pub exposures: Option<PathBuf>,
    #[arg(long, default_value = "female")]
    pub sex: Sex,
    #[arg(long, default_value = "0:100")]
    pub ages: InclusiveRange,
    #[arg(long, requires = "deaths")]
    pub years: Option<InclusiveRange>,
}

impl SourceArgs {
    pub fn inline_data(&self) -> Option<DataArgs> {
        Some(DataArgs {
            deaths: self.deaths.clone()?,
            exposures: self.exposures.clone()?,
            sex: self.sex,
            ages: self.ages,
            years: self.years?,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Model for an inline fit.
    #[arg(long, value_enum, default_value = "lc_poisson")]
    pub model: ModelArg,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Years to project past the last fitted year.
    #[arg(long, default_value_t = 20)]
    pub horizon: usize,
    /// Number of simulated period-index paths.
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantile levels for the prediction bands.
    #[arg(long, value_delimiter = ',', default_value = "0.025,0.5,0.975")]
    pub quantiles: Vec<f64>,
    /// Drop the innovation and drift-uncertainty terms.
    #[arg(long)]
    pub zero_volatility: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Fit directories to compare (repeat the flag).
    #[arg(long, conflicts_with_all = ["deaths", "models"])]
    pub from: Vec<PathBuf>,
    /// Models to fit inline on one surface.
    #[arg(long, value_enum, value_delimiter = ',', requires = "deaths")]
    pub models: Vec<ModelArg>,
    #[arg(long, requires_all = ["exposures", "years"])]
    pub deaths: Option<PathBuf>,
    #[arg(long, requires = "deaths")]
    pub exposures: Option<PathBuf>,
    #[arg(long, default_value = "female")]
    pub sex: Sex,
    #[arg(long, default_value = "0:100")]
    pub ages: InclusiveRange,
    #[arg(long, requires = "deaths")]
    pub years: Option<InclusiveRange>,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Labels for the compared models, in order.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Years to tabulate; defaults to every fitted year.
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

impl CompareArgs {
    pub fn inline_data(&self) -> Option<DataArgs> {
        Some(DataArgs {
            deaths: self.deaths.clone()?,
            exposures: self.exposures.clone()?,
            sex: self.sex,
            ages: self.ages,
            years: self.years?,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurvesArgs {
    /// Lee-Carter fit directories (repeat the flag).
    #[arg(long, required = true)]
    pub from: Vec<PathBuf>,
    /// Curve labels, in the order of `--from`.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Calendar years to export; years past the fit use the central forecast.
    #[arg(long, value_delimiter = ',', required = true)]
    pub at: Vec<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `run_manifest.json` written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
