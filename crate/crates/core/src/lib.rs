//! Lee-Carter family stochastic mortality models.
//!
//! Death counts on an age-by-year grid are modelled through a log central
//! death rate. Parameters are estimated by block-coordinate Newton ascent on
//! a Poisson or a gamma-mixed Poisson (negative binomial) likelihood; the
//! period index is then projected as a random walk with drift.
//!
//! ```no_run
//! use lcmort_core::{build_surface, fit_poisson, parse_hmd_table, FitConfig, InclusiveRange, Sex, TableKind};
//!
//! let deaths = parse_hmd_table(std::fs::File::open("Deaths_1x1.txt")?, TableKind::Deaths)?;
//! let exposures = parse_hmd_table(std::fs::File::open("Exposures_1x1.txt")?, TableKind::Exposures)?;
//! let surface = build_surface(
//!     &deaths,
//!     &exposures,
//!     Sex::Female,
//!     InclusiveRange::new(0, 100)?,
//!     InclusiveRange::new(1959, 2009)?,
//! )?;
//! let (params, report) = fit_poisson(&surface, &FitConfig::default())?;
//! println!("{} sweeps, lnL = {}", report.iterations, report.final_loglik);
//! # Ok::<(), lcmort_core::Error>(())
//! ```

pub mod cohort;
pub mod diagnostics;
pub mod error;
pub mod forecast;
pub mod hmd;
pub mod lee_carter;
mod likelihood;
pub mod model;
pub mod negbin;
pub mod poisson;
pub mod report;

pub use cohort::{
    cohort_counts, cohort_labels, fit_plat, fit_rh, plat_fitted_deaths, plat_normalize,
    rh_fitted_deaths, rh_normalize, CohortOptions, PlatParams, RenshawHabermanParams,
};
pub use diagnostics::{
    compare_models, log_rate_curves, simulate_surface, ssr_by_year, write_curves_csv,
    ComparisonReport, CurvePoint, CurveSource, ModelSummary,
};
pub use error::{Cell, Error, Result};
pub use forecast::{
    estimate_drift, forecast_kappa, forecast_rates, DriftEstimate, KappaForecast, RateForecast,
    DEFAULT_QUANTILES,
};
pub use hmd::{
    build_surface, central_death_rate, parse_hmd_table, HmdRow, InclusiveRange, MortalitySurface,
    RawHmdTable, Sex, TableKind,
};
pub use lee_carter::{
    fitted_deaths, init_params, normalize, FitConfig, LeeCarterGradient, LeeCarterParams,
};
pub use likelihood::Distribution;
pub use model::BlockModel;
pub use negbin::{
    fit_negbin, negbin_gradient, negbin_loglik, negbin_logpmf, negbin_moments, negbin_sweep,
    NegBinCell,
};
pub use poisson::{fit_poisson, poisson_gradient, poisson_loglik, poisson_sweep};
pub use report::{FitReport, ModelKind};
