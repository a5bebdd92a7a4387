//! Lee-Carter under gamma-mixed Poisson (negative binomial) death counts.
//!
//! Individual death intensity in a heterogeneous cell is `Lambda ~
//! Gamma(shape a, rate tau)` and `D | Lambda ~ Poisson(Lambda)`, so `D` is
//! negative binomial. The cell is calibrated with `a = E` and
//! `tau = exp(-(alpha + beta * kappa))`, which makes the mean `a / tau` equal
//! the Poisson fitted deaths `E * exp(alpha + beta * kappa)`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hmd::MortalitySurface;
use crate::lee_carter::{self, FitConfig, LeeCarterGradient, LeeCarterParams};
use crate::likelihood::Distribution;
use crate::model;
use crate::report::FitReport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinCell {
    shape_alpha: f64,
    rate_tau: f64,
}

impl NegBinCell {
    pub fn new(shape_alpha: f64, rate_tau: f64) -> Result<Self> {
        if !(shape_alpha > 0.0 && shape_alpha.is_finite() && rate_tau > 0.0 && rate_tau.is_finite())
        {
            return Err(Error::Config(format!(
                "negative binomial cell needs positive finite shape and rate, got ({shape_alpha}, {rate_tau})"
            )));
        }
        Ok(Self {
            shape_alpha,
            rate_tau,
        })
    }

    /// Cell calibrated to exposure `exposure` and log rate `log_rate`.
    pub fn calibrated(exposure: f64, log_rate: f64) -> Result<Self> {
        Self::new(exposure, (-log_rate).exp())
    }

    pub fn shape_alpha(&self) -> f64 {
        self.shape_alpha
    }

    pub fn rate_tau(&self) -> f64 {
        self.rate_tau
    }
}

/// `ln Gamma(a + d) - ln Gamma(a)`, summed term by term for small integer
/// `d` so that large shapes do not lose the difference to cancellation.
fn ln_rising(a: f64, d: f64) -> f64 {
    if d == d.trunc() && d <= 1024.0 {
        (0..d as u32).map(|k| (a + k as f64).ln()).sum()
    } else {
        ln_gamma(a + d) - ln_gamma(a)
    }
}

/// Log probability of `d` deaths.
///
/// `ln Gamma(d+a) - ln Gamma(d+1) - ln Gamma(a) + a ln(tau/(1+tau)) + d ln(1/(1+tau))`.
pub fn negbin_logpmf(d: f64, cell: &NegBinCell) -> f64 {
    let a = cell.shape_alpha;
    let tau = cell.rate_tau;
    ln_rising(a, d) - ln_gamma(d + 1.0) - a * tau.recip().ln_1p() - d * tau.ln_1p()
}

/// Mean `a/tau` and variance `a/tau + a/tau^2` of the mixture.
pub fn negbin_moments(cell: &NegBinCell) -> (f64, f64) {
    let mean = cell.shape_alpha / cell.rate_tau;
    (mean, mean + mean / cell.rate_tau)
}

/// Sum of calibrated cell log-pmfs:
/// `lnG(D+E) - lnG(D+1) - lnG(E) - E eta - (E + D) ln(1 + exp(-eta))`.
pub fn negbin_loglik(params: &LeeCarterParams, surface: &MortalitySurface) -> Result<f64> {
    model::loglik(params, surface, Distribution::NegativeBinomial)
}

/// Block gradients built from the per-cell score
/// `-E + (E + D) e^-eta / (1 + e^-eta)`.
pub fn negbin_gradient(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
) -> Result<LeeCarterGradient> {
    lee_carter::lee_carter_gradient(params, surface, Distribution::NegativeBinomial)
}

/// One alpha, kappa, beta pass of Newton block updates on the
/// negative-binomial likelihood; the curvature per cell is
/// `(E + D) e^-eta / (1 + e^-eta)^2`.
pub fn negbin_sweep(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
) -> Result<LeeCarterParams> {
    lee_carter::lee_carter_sweep(params, surface, Distribution::NegativeBinomial)
}

pub fn fit_negbin(
    surface: &MortalitySurface,
    config: &FitConfig,
) -> Result<(LeeCarterParams, FitReport)> {
    lee_carter::fit_lee_carter(surface, config, Distribution::NegativeBinomial)
}
