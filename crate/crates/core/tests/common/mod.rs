#![allow(dead_code)]

pub mod mixture;

use lcmort_core::model::{gradient, loglik};
use lcmort_core::{
    normalize, simulate_surface, BlockModel, Distribution, LeeCarterParams, MortalitySurface,
    PlatParams, RenshawHabermanParams,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson};
use statrs::function::gamma::ln_gamma;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gompertz-like level, declining positive age sensitivity and a trending
/// period index with a wiggle; normalised, with `beta * kappa` within about
/// one unit of log rate.
pub fn smooth_lc_params(n: usize, t: usize) -> LeeCarterParams {
    let alpha = (0..n).map(|x| -6.5 + 0.1 * x as f64).collect();
    let beta = (0..n)
        .map(|x| (1.5 - x as f64 / n as f64) / n as f64)
        .collect();
    let mid = (t as f64 - 1.0) / 2.0;
    let kappa = (0..t)
        .map(|j| {
            let j = j as f64;
            -1.2 * (j - mid) + 3.0 * (j / 3.0).sin()
        })
        .collect();
    normalize(&LeeCarterParams { alpha, beta, kappa }).unwrap()
}

pub fn random_lc_params<R: Rng>(rng: &mut R, n: usize, t: usize) -> LeeCarterParams {
    LeeCarterParams {
        alpha: (0..n).map(|_| rng.random_range(-6.0..-2.0)).collect(),
        beta: (0..n).map(|_| rng.random_range(0.05..0.4)).collect(),
        kappa: (0..t).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

pub fn constant_exposures(n: usize, t: usize, e: f64) -> Array2<f64> {
    Array2::from_elem((n, t), e)
}

pub fn synthetic_surface(
    params: &LeeCarterParams,
    exposure: f64,
    dist: Distribution,
    seed: u64,
) -> MortalitySurface {
    let e = constant_exposures(params.n_ages(), params.n_years(), exposure);
    simulate_surface(params, &e, 40, 1970, dist, seed).unwrap()
}

/// Poisson deaths on random exposures and log rates; no model structure.
pub fn random_surface<R: Rng>(rng: &mut R, n: usize, t: usize) -> MortalitySurface {
    let exposures = Array2::from_shape_fn((n, t), |_| rng.random_range(200.0..20_000.0));
    let deaths = Array2::from_shape_fn((n, t), |(i, j)| {
        let m = (-5.0 + 0.3 * i as f64 - 0.02 * j as f64 + rng.random_range(-0.3..0.3)).exp();
        Poisson::new(m * exposures[[i, j]]).unwrap().sample(rng)
    });
    MortalitySurface::new(50, 1990, deaths, exposures).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs_matrix_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Five-point central difference of `f` at `x`.
pub fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Worst step-to-step decrease of a log-likelihood trace (0 when monotone).
pub fn worst_decrease(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

/// Largest `|fit - truth| / se` over every parameter, with standard errors
/// from the diagonal of the expected information at the truth. `dispersion`
/// maps a fitted count and rate to the count variance.
pub fn recovery_z(
    fit: &LeeCarterParams,
    truth: &LeeCarterParams,
    exposures: &Array2<f64>,
    dispersion: impl Fn(f64, f64) -> f64,
) -> f64 {
    let (n, t) = exposures.dim();
    // information about eta carried by one cell: mean^2 / variance
    let info = Array2::from_shape_fn((n, t), |(x, j)| {
        let m = truth.log_rate_at(x, j).exp();
        let mu = exposures[[x, j]] * m;
        mu * mu / dispersion(mu, m)
    });
    let mut worst = 0.0f64;
    for x in 0..n {
        let ia: f64 = (0..t).map(|j| info[[x, j]]).sum();
        let ib: f64 = (0..t).map(|j| info[[x, j]] * truth.kappa[j].powi(2)).sum();
        worst = worst.max((fit.alpha[x] - truth.alpha[x]).abs() * ia.sqrt());
        worst = worst.max((fit.beta[x] - truth.beta[x]).abs() * ib.sqrt());
    }
    for j in 0..t {
        let ik: f64 = (0..n).map(|x| info[[x, j]] * truth.beta[x].powi(2)).sum();
        worst = worst.max((fit.kappa[j] - truth.kappa[j]).abs() * ik.sqrt());
    }
    worst
}

pub fn poisson_variance(mu: f64, _m: f64) -> f64 {
    mu
}

pub fn negbin_variance(mu: f64, m: f64) -> f64 {
    mu * (1.0 + m)
}

/// Log-likelihood as a plain per-cell sum of the closed-form terms.
pub fn brute_force_loglik(params: &LeeCarterParams, s: &MortalitySurface, negbin: bool) -> f64 {
    let mut total = 0.0;
    for x in 0..s.n_ages() {
        for t in 0..s.n_years() {
            let d = s.deaths()[[x, t]];
            let e = s.exposures()[[x, t]];
            let eta = params.alpha[x] + params.beta[x] * params.kappa[t];
            total += if negbin {
                ln_gamma(d + e)
                    - ln_gamma(d + 1.0)
                    - ln_gamma(e)
                    - e * eta
                    - (e + d) * (1.0 + (-eta).exp()).ln()
            } else {
                let mu = e * eta.exp();
                let log_term = if d > 0.0 { d * mu.ln() } else { 0.0 };
                log_term - mu - ln_gamma(d + 1.0)
            };
        }
    }
    total
}

/// Largest relative gap between the analytic gradient and five-point
/// differences of the log-likelihood, over every parameter.
pub fn worst_gradient_gap<M: BlockModel>(
    model: &M,
    surface: &MortalitySurface,
    dist: Distribution,
) -> f64 {
    let analytic = gradient(model, surface, dist).unwrap();
    let mut worst = 0.0f64;
    for (b, block) in analytic.iter().enumerate() {
        assert_eq!(block.len(), model.block_len(b));
        for (k, &g) in block.iter().enumerate() {
            let at = |v: f64| {
                let mut m = model.clone();
                *m.param_mut(b, k) = v;
                loglik(&m, surface, dist).unwrap()
            };
            let x = model.param(b, k);
            let numeric = five_point(at, x, 1e-4 * x.abs().max(1.0));
            worst = worst.max(relative_error(g, numeric));
        }
    }
    worst
}

pub fn random_rh<R: Rng>(rng: &mut R, n: usize, t: usize) -> RenshawHabermanParams {
    let mut v = |len: usize, lo: f64, hi: f64| (0..len).map(|_| rng.random_range(lo..hi)).collect();
    RenshawHabermanParams {
        alpha: v(n, -6.0, -3.0),
        beta0: v(n, 0.05, 0.3),
        beta1: v(n, 0.05, 0.4),
        kappa: v(t, -3.0, 3.0),
        gamma: v(n + t - 1, -0.5, 0.5),
    }
}

pub fn random_plat<R: Rng>(rng: &mut R, ages: &[i32], t: usize, spread: f64) -> PlatParams {
    let mut p = PlatParams::zeros(ages, t);
    for b in 0..p.block_names().len() {
        for k in 0..p.block_len(b) {
            *p.param_mut(b, k) = if b == 0 {
                rng.random_range(-6.0..-3.0)
            } else {
                rng.random_range(-spread..spread)
            };
        }
    }
    p
}
