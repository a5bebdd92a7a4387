//! Shared inputs for the criterion benches.

use lcmort_core::{simulate_surface, Distribution, LeeCarterParams, MortalitySurface};
use ndarray::Array2;

/// A smooth Lee-Carter parameter set with a linear decline in the period
/// index, shaped like an adult female population.
pub fn synthetic_params(n_ages: usize, n_years: usize) -> LeeCarterParams {
    let alpha = (0..n_ages)
        .map(|x| -9.0 + 0.085 * x as f64)
        .collect::<Vec<_>>();
    let raw: Vec<f64> = (0..n_ages)
        .map(|x| 1.5 - (x as f64 / n_ages as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    let beta = raw.iter().map(|b| b / total).collect();
    let mid = (n_years as f64 - 1.0) / 2.0;
    let kappa = (0..n_years)
        .map(|t| -1.2 * (t as f64 - mid) + 0.8 * ((t as f64) * 1.7).sin())
        .collect::<Vec<_>>();
    let mean = kappa.iter().sum::<f64>() / n_years as f64;
    LeeCarterParams {
        alpha,
        beta,
        kappa: kappa.iter().map(|k| k - mean).collect(),
    }
}

/// Deaths drawn from `synthetic_params` on exposures that shrink with age.
pub fn synthetic_surface(
    n_ages: usize,
    n_years: usize,
    distribution: Distribution,
) -> MortalitySurface {
    let params = synthetic_params(n_ages, n_years);
    let exposures = Array2::from_shape_fn((n_ages, n_years), |(x, _)| {
        2.0e5 * (-0.03 * x as f64).exp() + 500.0
    });
    simulate_surface(&params, &exposures, 0, 1959, distribution, 7)
        .expect("valid synthetic surface")
}
