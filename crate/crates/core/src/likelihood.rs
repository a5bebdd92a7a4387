//! Per-cell death-count likelihoods on the log-rate scale.
//!
//! Every model in this crate predicts a log central death rate `eta` for each
//! (age, year) cell; fitted deaths are `E * exp(eta)`. The cell log-likelihood
//! is evaluated as a deviance-like term centred at the saturated fit plus a
//! per-cell constant, so that sums over thousands of large-count cells stay
//! accurate enough for step-by-step ascent checks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::hmd::MortalitySurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Poisson,
    NegativeBinomial,
}

impl Distribution {
    pub fn label(self) -> &'static str {
        match self {
            Distribution::Poisson => "poisson",
            Distribution::NegativeBinomial => "negative_binomial",
        }
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-likelihood of a cell at its saturated log rate `ln(d/e)`.
fn saturated(dist: Distribution, d: f64, e: f64) -> f64 {
    match dist {
        Distribution::Poisson if d > 0.0 => d * d.ln() - d - ln_gamma(d + 1.0),
        Distribution::NegativeBinomial if d > 0.0 => {
            let r = d / e;
            ln_gamma(d + e) - ln_gamma(d + 1.0) - ln_gamma(e) + d * r.ln() - (e + d) * r.ln_1p()
        }
        _ => 0.0,
    }
}

/// Likelihood of a fixed surface, with the eta-independent parts cached.
pub(crate) struct CellLikelihood<'a> {
    dist: Distribution,
    deaths: &'a Array2<f64>,
    exposures: &'a Array2<f64>,
    log_exposures: Array2<f64>,
    constant_total: f64,
}

impl<'a> CellLikelihood<'a> {
    pub(crate) fn new(surface: &'a MortalitySurface, dist: Distribution) -> Self {
        let deaths = surface.deaths();
        let exposures = surface.exposures();
        let log_exposures = exposures.mapv(f64::ln);
        let constant_total = deaths
            .iter()
            .zip(exposures.iter())
            .map(|(&d, &e)| saturated(dist, d, e))
            .sum();
        Self {
            dist,
            deaths,
            exposures,
            log_exposures,
            constant_total,
        }
    }

    /// Cell log-likelihood minus its saturated value.
    #[inline]
    pub(crate) fn centred(&self, i: usize, j: usize, eta: f64) -> f64 {
        let d = self.deaths[[i, j]];
        let e = self.exposures[[i, j]];
        match self.dist {
            Distribution::Poisson => {
                let fitted = e * eta.exp();
                if d > 0.0 {
                    d * (self.log_exposures[[i, j]] + eta - d.ln()) + d - fitted
                } else {
                    -fitted
                }
            }
            Distribution::NegativeBinomial => {
                if d > 0.0 {
                    let r = d / e;
                    let shift = eta + self.log_exposures[[i, j]] - d.ln();
                    let log_ratio = if eta > 35.0 {
                        log1p_exp(eta) - r.ln_1p()
                    } else {
                        ((eta.exp() - r) / (1.0 + r)).ln_1p()
                    };
                    d * shift - (e + d) * log_ratio
                } else {
                    -e * log1p_exp(eta)
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn cell(&self, i: usize, j: usize, eta: f64) -> f64 {
        let (d, e) = (self.deaths[[i, j]], self.exposures[[i, j]]);
        self.centred(i, j, eta) + saturated(self.dist, d, e)
    }

    /// First derivative and negated second derivative with respect to eta.
    #[inline]
    pub(crate) fn score_curvature(&self, i: usize, j: usize, eta: f64) -> (f64, f64) {
        let d = self.deaths[[i, j]];
        let e = self.exposures[[i, j]];
        match self.dist {
            Distribution::Poisson => {
                let fitted = e * eta.exp();
                (d - fitted, fitted)
            }
            Distribution::NegativeBinomial => {
                // p = 1/(1+e^eta) = e^{-eta}/(1+e^{-eta})
                let p = if eta > 0.0 {
                    let z = (-eta).exp();
                    z / (1.0 + z)
                } else {
                    1.0 / (1.0 + eta.exp())
                };
                let q = 1.0 - p;
                let fitted = e * eta.exp();
                ((d - fitted) * p, (e + d) * p * q)
            }
        }
    }

    pub(crate) fn total(&self, eta: &Array2<f64>) -> f64 {
        let mut sum = 0.0;
        for ((i, j), &v) in eta.indexed_iter() {
            sum += self.centred(i, j, v);
        }
        sum + self.constant_total
    }
}
