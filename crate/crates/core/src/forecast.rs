//! Random walk with drift for the period index and the mortality-rate
//! forecasts it implies.
//!
//! `kappa[T+s] = kappa[T] + (c + sc * eta) * s + sigma * sum_{u=1..s} xi[u]`,
//! with one `eta ~ N(0,1)` per simulated path (drift uncertainty) and i.i.d.
//! `xi ~ N(0,1)` per step. Every path draws from its own ChaCha stream keyed
//! by `(seed, path index)`, so serial and parallel simulation agree exactly.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lee_carter::LeeCarterParams;

pub const DEFAULT_QUANTILES: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub c_hat: f64,
    pub sigma2_hat: f64,
    /// Standard error of `c_hat`, `sqrt(sigma2_hat / (T - 1))`.
    pub sc: f64,
    pub n_years: usize,
}

impl DriftEstimate {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma2_hat.sqrt()
    }

    /// Same drift with no innovation or drift uncertainty.
    pub fn without_noise(&self) -> Self {
        Self {
            sigma2_hat: 0.0,
            sc: 0.0,
            ..*self
        }
    }
}

pub fn estimate_drift(kappa: &[f64]) -> Result<DriftEstimate> {
    let t = kappa.len();
    if t < 2 {
        return Err(Error::InsufficientData { needed: 2, got: t });
    }
    let steps = (t - 1) as f64;
    let c_hat = (kappa[t - 1] - kappa[0]) / steps;
    let sigma2_hat = kappa
        .windows(2)
        .map(|w| (w[1] - w[0] - c_hat).powi(2))
        .sum::<f64>()
        / steps;
    Ok(DriftEstimate {
        c_hat,
        sigma2_hat,
        sc: sigma2_hat.sqrt() / steps.sqrt(),
        n_years: t,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaForecast {
    pub horizon: usize,
    pub last_kappa: f64,
    /// `n_paths x horizon`; column `s - 1` holds `kappa[T+s]`.
    pub paths: Array2<f64>,
    /// `kappa[T] + c_hat * s`, `s = 1..=horizon`.
    pub central: Vec<f64>,
    pub drift: DriftEstimate,
    pub seed: u64,
}

impl KappaForecast {
    pub fn n_paths(&self) -> usize {
        self.paths.nrows()
    }

    /// Sample quantiles of `kappa[T+s]` per step: `result[l][s-1]`.
    pub fn quantiles(&self, levels: &[f64]) -> Vec<Vec<f64>> {
        let per_step: Vec<Vec<f64>> = self
            .paths
            .columns()
            .into_iter()
            .map(|c| {
                let mut v = c.to_vec();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        levels
            .iter()
            .map(|&q| per_step.iter().map(|v| sorted_quantile(v, q)).collect())
            .collect()
    }
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn simulate_path(
    last: f64,
    drift: &DriftEstimate,
    horizon: usize,
    seed: u64,
    path: u64,
    out: &mut [f64],
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let eta: f64 = rng.sample(StandardNormal);
    let slope = drift.c_hat + drift.sc * eta;
    let sigma = drift.sigma_hat();
    let mut walk = 0.0;
    for (s, v) in out.iter_mut().enumerate().take(horizon) {
        let xi: f64 = rng.sample(StandardNormal);
        walk += xi;
        *v = last + slope * (s + 1) as f64 + sigma * walk;
    }
}

fn simulate(
    kappa: &[f64],
    drift: &DriftEstimate,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    parallel: bool,
) -> Result<KappaForecast> {
    if horizon == 0 || n_paths == 0 {
        return Err(Error::Config(
            "forecast horizon and path count must be positive".into(),
        ));
    }
    let last = *kappa
        .last()
        .ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let mut paths = Array2::zeros((n_paths, horizon));
    let rows = paths.as_slice_mut().expect("fresh array is contiguous");
    let run =
        |(p, row): (usize, &mut [f64])| simulate_path(last, drift, horizon, seed, p as u64, row);
    if parallel {
        rows.par_chunks_mut(horizon).enumerate().for_each(run);
    } else {
        rows.chunks_mut(horizon).enumerate().for_each(run);
    }
    let central = (1..=horizon)
        .map(|s| last + drift.c_hat * s as f64)
        .collect();
    Ok(KappaForecast {
        horizon,
        last_kappa: last,
        paths,
        central,
        drift: *drift,
        seed,
    })
}

/// Simulates `n_paths` trajectories of the period index over `horizon` years.
pub fn forecast_kappa(
    kappa: &[f64],
    drift: &DriftEstimate,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<KappaForecast> {
    simulate(kappa, drift, horizon, n_paths, seed, true)
}

/// Single-threaded [`forecast_kappa`]; produces identical paths.
pub fn forecast_kappa_serial(
    kappa: &[f64],
    drift: &DriftEstimate,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<KappaForecast> {
    simulate(kappa, drift, horizon, n_paths, seed, false)
}

/// Mortality-rate forecast per age and horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct RateForecast {
    pub levels: Vec<f64>,
    /// `exp(alpha + beta * central kappa)`, `n_ages x horizon`.
    pub central: Array2<f64>,
    /// One `n_ages x horizon` matrix per requested level.
    pub quantiles: Vec<Array2<f64>>,
}

impl RateForecast {
    /// Writes `age,horizon_year,quantile,rate`; the central trajectory uses
    /// the quantile label `central`.
    pub fn write_csv<W: Write>(&self, ages: &[i32], last_year: i32, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["age", "horizon_year", "quantile", "rate"])?;
        for (x, age) in ages.iter().enumerate() {
            for s in 0..self.central.ncols() {
                let year = last_year + s as i32 + 1;
                w.serialize((age, year, "central", self.central[[x, s]]))?;
                for (level, q) in self.levels.iter().zip(&self.quantiles) {
                    w.serialize((age, year, level.to_string(), q[[x, s]]))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Holds `alpha` and `beta` fixed and pushes every simulated `kappa` path
/// through `exp(alpha + beta * kappa)`.
pub fn forecast_rates(
    params: &LeeCarterParams,
    fc: &KappaForecast,
    levels: &[f64],
) -> Result<RateForecast> {
    if levels.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::Config("quantile levels must lie in [0, 1]".into()));
    }
    let n = params.n_ages();
    let h = fc.horizon;
    let central = Array2::from_shape_fn((n, h), |(x, s)| {
        (params.alpha[x] + params.beta[x] * fc.central[s]).exp()
    });
    let mut quantiles = vec![Array2::zeros((n, h)); levels.len()];
    let mut buf = vec![0.0; fc.n_paths()];
    for x in 0..n {
        for s in 0..h {
            for (b, k) in buf.iter_mut().zip(fc.paths.column(s)) {
                *b = (params.alpha[x] + params.beta[x] * k).exp();
            }
            buf.sort_by(f64::total_cmp);
            for (l, &q) in levels.iter().enumerate() {
                quantiles[l][[x, s]] = sorted_quantile(&buf, q);
            }
        }
    }
    Ok(RateForecast {
        levels: levels.to_vec(),
        central,
        quantiles,
    })
}
