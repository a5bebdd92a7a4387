//! Lee-Carter under Poisson death counts, `D ~ Poisson(E * exp(alpha + beta * kappa))`.

use crate::error::Result;
use crate::hmd::MortalitySurface;
use crate::lee_carter::{self, FitConfig, LeeCarterGradient, LeeCarterParams};
use crate::likelihood::Distribution;
use crate::model;
use crate::report::FitReport;

/// `sum D ln(E exp(eta)) - E exp(eta) - ln Gamma(D + 1)` over all cells.
pub fn poisson_loglik(params: &LeeCarterParams, surface: &MortalitySurface) -> Result<f64> {
    model::loglik(params, surface, Distribution::Poisson)
}

/// Block gradients `sum_t (D - D^)`, `sum_t (D - D^) kappa`, `sum_x (D - D^) beta`.
pub fn poisson_gradient(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
) -> Result<LeeCarterGradient> {
    lee_carter::lee_carter_gradient(params, surface, Distribution::Poisson)
}

/// One alpha, kappa, beta pass of Newton block updates. Each parameter moves
/// by `sum (D - D^) w / sum D^ w^2`, halved until the likelihood does not
/// drop; fitted deaths are recomputed after every block.
pub fn poisson_sweep(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
) -> Result<LeeCarterParams> {
    lee_carter::lee_carter_sweep(params, surface, Distribution::Poisson)
}

pub fn fit_poisson(
    surface: &MortalitySurface,
    config: &FitConfig,
) -> Result<(LeeCarterParams, FitReport)> {
    lee_carter::fit_lee_carter(surface, config, Distribution::Poisson)
}
