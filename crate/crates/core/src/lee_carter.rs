//! Lee-Carter parameterization: `ln m[x,t] = alpha[x] + beta[x] * kappa[t]`.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Cell, Error, Result};
use crate::hmd::MortalitySurface;
use crate::likelihood::{CellLikelihood, Distribution};
use crate::model::{self, BlockModel, DesignCell, SweepPlan};
use crate::report::{FitReport, ModelKind, ASCENT_NOTE};

#[derive(Debug, Clone, PartialEq)]
pub struct LeeCarterParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl LeeCarterParams {
    pub fn n_ages(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_years(&self) -> usize {
        self.kappa.len()
    }

    #[inline]
    pub fn log_rate_at(&self, age: usize, year: usize) -> f64 {
        self.alpha[age] + self.beta[age] * self.kappa[year]
    }

    /// Applies `kappa -> c * kappa`, `beta -> beta / c`, which leaves every
    /// fitted rate unchanged.
    pub fn rescaled(&self, c: f64) -> Self {
        Self {
            alpha: self.alpha.clone(),
            beta: self.beta.iter().map(|b| b / c).collect(),
            kappa: self.kappa.iter().map(|k| k * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha
            .iter()
            .chain(&self.beta)
            .chain(&self.kappa)
            .all(|v| v.is_finite())
    }

    pub fn write_age_csv<W: Write>(&self, ages: &[i32], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["age", "alpha", "beta"])?;
        for ((age, a), b) in ages.iter().zip(&self.alpha).zip(&self.beta) {
            w.serialize((age, a, b))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_year_csv<W: Write>(&self, years: &[i32], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "kappa"])?;
        for (year, k) in years.iter().zip(&self.kappa) {
            w.serialize((year, k))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the two files written by [`write_age_csv`](Self::write_age_csv)
    /// and [`write_year_csv`](Self::write_year_csv). Returns the parameters
    /// with their age and year labels.
    pub fn read_csv<A: Read, Y: Read>(ages: A, years: Y) -> Result<(Self, Vec<i32>, Vec<i32>)> {
        #[derive(Deserialize)]
        struct AgeRow {
            age: i32,
            alpha: f64,
            beta: f64,
        }
        #[derive(Deserialize)]
        struct YearRow {
            year: i32,
            kappa: f64,
        }
        let age_rows: Vec<AgeRow> = csv::Reader::from_reader(ages)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        let year_rows: Vec<YearRow> = csv::Reader::from_reader(years)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        if age_rows.is_empty() || year_rows.is_empty() {
            return Err(Error::Config("parameter files are empty".into()));
        }
        let contiguous = |v: &[i32]| v.windows(2).all(|w| w[1] == w[0] + 1);
        let age_labels: Vec<i32> = age_rows.iter().map(|r| r.age).collect();
        let year_labels: Vec<i32> = year_rows.iter().map(|r| r.year).collect();
        if !contiguous(&age_labels) || !contiguous(&year_labels) {
            return Err(Error::Config(
                "parameter files must list contiguous, increasing ages and years".into(),
            ));
        }
        let params = Self {
            alpha: age_rows.iter().map(|r| r.alpha).collect(),
            beta: age_rows.iter().map(|r| r.beta).collect(),
            kappa: year_rows.iter().map(|r| r.kappa).collect(),
        };
        Ok((params, age_labels, year_labels))
    }
}

pub(crate) const ALPHA: usize = 0;
pub(crate) const KAPPA: usize = 1;
pub(crate) const BETA: usize = 2;

impl BlockModel for LeeCarterParams {
    fn block_names(&self) -> &'static [&'static str] {
        &["alpha", "kappa", "beta"]
    }

    fn block_len(&self, block: usize) -> usize {
        match block {
            ALPHA | BETA => self.alpha.len(),
            _ => self.kappa.len(),
        }
    }

    fn param(&self, block: usize, index: usize) -> f64 {
        match block {
            ALPHA => self.alpha[index],
            KAPPA => self.kappa[index],
            _ => self.beta[index],
        }
    }

    fn param_mut(&mut self, block: usize, index: usize) -> &mut f64 {
        match block {
            ALPHA => &mut self.alpha[index],
            KAPPA => &mut self.kappa[index],
            _ => &mut self.beta[index],
        }
    }

    fn grid(&self) -> (usize, usize) {
        (self.alpha.len(), self.kappa.len())
    }

    fn log_rate(&self, age: usize, year: usize) -> f64 {
        self.log_rate_at(age, year)
    }

    fn design(&self, block: usize, index: usize, out: &mut Vec<DesignCell>) {
        match block {
            ALPHA => out.extend((0..self.kappa.len()).map(|t| DesignCell {
                age: index,
                year: t,
                weight: 1.0,
            })),
            KAPPA => out.extend((0..self.alpha.len()).map(|x| DesignCell {
                age: x,
                year: index,
                weight: self.beta[x],
            })),
            _ => out.extend((0..self.kappa.len()).map(|t| DesignCell {
                age: index,
                year: t,
                weight: self.kappa[t],
            })),
        }
    }
}

/// Iteration limits for the maximum-likelihood fitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub loglik_rel_tolerance: f64,
    /// Continuity correction for zero-death cells, used only when
    /// initialising `alpha`.
    pub zero_death_offset: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            loglik_rel_tolerance: 1e-8,
            zero_death_offset: 0.5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.loglik_rel_tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.zero_death_offset >= 0.0) || !self.zero_death_offset.is_finite() {
            return Err(Error::Config(
                "zero_death_offset must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Starting values: `alpha` is the time average of the observed log rates
/// (zero-death cells raised to `offset` deaths), `beta = 1/N`, `kappa = 0`.
pub fn init_params(surface: &MortalitySurface, offset: f64) -> Result<LeeCarterParams> {
    let (n, t) = (surface.n_ages(), surface.n_years());
    let d = surface.deaths();
    let e = surface.exposures();
    let mut alpha = vec![0.0; n];
    for (x, a) in alpha.iter_mut().enumerate() {
        let mut sum = 0.0;
        for y in 0..t {
            let deaths = d[[x, y]].max(offset);
            if deaths <= 0.0 {
                return Err(Error::Initialization {
                    cell: Cell {
                        age: surface.ages()[x],
                        year: surface.years()[y],
                    },
                });
            }
            sum += (deaths / e[[x, y]]).ln();
        }
        *a = sum / t as f64;
    }
    Ok(LeeCarterParams {
        alpha,
        beta: vec![1.0 / n as f64; n],
        kappa: vec![0.0; t],
    })
}

/// Moves the parameters along the gauge directions so that
/// `sum(kappa) = 0` and `sum(beta) = 1`; fitted rates are unchanged.
pub fn normalize(params: &LeeCarterParams) -> Result<LeeCarterParams> {
    let scale: f64 = params.beta.iter().sum();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate(format!(
            "sum of beta is {scale}; cannot normalise"
        )));
    }
    let mean = params.kappa.iter().sum::<f64>() / params.kappa.len() as f64;
    let alpha = params
        .alpha
        .iter()
        .zip(&params.beta)
        .map(|(a, b)| a + b * mean)
        .collect();
    let beta = params.beta.iter().map(|b| b / scale).collect();
    let kappa: Vec<f64> = params.kappa.iter().map(|k| scale * (k - mean)).collect();
    // rounding leaves sum(kappa) at ~1e-15 * T * |kappa|; recentre once more
    let residual = kappa.iter().sum::<f64>() / kappa.len() as f64;
    let kappa = kappa.into_iter().map(|k| k - residual).collect();
    Ok(LeeCarterParams { alpha, beta, kappa })
}

/// `E * exp(alpha + beta * kappa)` on every cell.
pub fn fitted_deaths(params: &LeeCarterParams, surface: &MortalitySurface) -> Result<Array2<f64>> {
    crate::model::check_grid(params, surface)?;
    let e = surface.exposures();
    Ok(Array2::from_shape_fn(e.dim(), |(x, t)| {
        e[[x, t]] * params.log_rate_at(x, t).exp()
    }))
}

/// Log-likelihood gradient with the same layout as [`LeeCarterParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeeCarterGradient {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub(crate) fn lee_carter_gradient(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
    dist: Distribution,
) -> Result<LeeCarterGradient> {
    let mut blocks = model::gradient(params, surface, dist)?;
    let beta = blocks.remove(BETA);
    let kappa = blocks.remove(KAPPA);
    let alpha = blocks.remove(ALPHA);
    Ok(LeeCarterGradient { alpha, beta, kappa })
}

pub(crate) fn sweep_plan(params: &LeeCarterParams) -> SweepPlan {
    // With a single year sum(kappa) = 0 pins kappa at zero and beta drops
    // out of the likelihood; only the level is estimated.
    let order = if params.n_years() == 1 {
        vec![ALPHA]
    } else {
        vec![ALPHA, KAPPA, BETA]
    };
    SweepPlan::all(params, order)
}

pub(crate) fn lee_carter_sweep(
    params: &LeeCarterParams,
    surface: &MortalitySurface,
    dist: Distribution,
) -> Result<LeeCarterParams> {
    model::check_grid(params, surface)?;
    if !params.is_finite() {
        return Err(Error::Degenerate("parameters must be finite".into()));
    }
    let lik = CellLikelihood::new(surface, dist);
    model::sweep(
        params,
        &lik,
        &SweepPlan::all(params, vec![ALPHA, KAPPA, BETA]),
    )
}

pub(crate) fn fit_lee_carter(
    surface: &MortalitySurface,
    config: &FitConfig,
    dist: Distribution,
) -> Result<(LeeCarterParams, FitReport)> {
    config.validate()?;
    let start = init_params(surface, config.zero_death_offset)?;
    let lik = CellLikelihood::new(surface, dist);
    let plan = sweep_plan(&start);
    let ascent = model::ascend(
        start,
        &lik,
        &plan,
        config.loglik_rel_tolerance,
        config.max_iterations,
    )?;
    let params = normalize(&ascent.model)?;
    let mut notes = vec![ASCENT_NOTE.to_string()];
    if surface.n_years() == 1 {
        notes.push("single fitted year: kappa fixed at 0, beta not estimated".into());
    }
    let report = FitReport::build(
        ModelKind::LeeCarter,
        dist,
        surface,
        model::log_rates(&params),
        ascent.trace,
        ascent.iterations,
        ascent.converged,
        notes,
    );
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn alpha_is_mean_log_rate() {
        let e2 = 1f64.exp().powi(2);
        let e4 = 1f64.exp().powi(4);
        let s = MortalitySurface::new(0, 2000, arr2(&[[e2, e4]]), arr2(&[[1.0, 1.0]])).unwrap();
        let p = init_params(&s, 0.5).unwrap();
        assert!((p.alpha[0] - 3.0).abs() < 1e-12);
        assert_eq!(p.beta, vec![1.0]);
        assert_eq!(p.kappa, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_offset_with_zero_deaths_is_an_error() {
        let s = MortalitySurface::new(5, 2000, arr2(&[[0.0, 3.0]]), arr2(&[[1.0, 1.0]])).unwrap();
        match init_params(&s, 0.0) {
            Err(Error::Initialization { cell }) => assert_eq!(cell, Cell { age: 5, year: 2000 }),
            other => panic!("unexpected {other:?}"),
        }
        let p = init_params(&s, 0.5).unwrap();
        assert!(((0.5f64.ln() + 3f64.ln()) / 2.0 - p.alpha[0]).abs() < 1e-12);
    }

    #[test]
    fn normalize_fixed_point_and_degenerate() {
        let p = LeeCarterParams {
            alpha: vec![-3.0, -2.0],
            beta: vec![0.25, 0.75],
            kappa: vec![-1.0, 0.5, 0.5],
        };
        let q = normalize(&p).unwrap();
        for (a, b) in p
            .alpha
            .iter()
            .chain(&p.beta)
            .chain(&p.kappa)
            .zip(q.alpha.iter().chain(&q.beta).chain(&q.kappa))
        {
            assert!((a - b).abs() < 1e-12);
        }
        let bad = LeeCarterParams {
            beta: vec![1.0, -1.0],
            ..p
        };
        assert!(matches!(normalize(&bad), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fitted_deaths_simple_values() {
        let s = MortalitySurface::new(0, 0, arr2(&[[1.0, 1.0]]), arr2(&[[10.0, 10.0]])).unwrap();
        let p = LeeCarterParams {
            alpha: vec![2f64.ln()],
            beta: vec![0.3],
            kappa: vec![0.0, 0.0],
        };
        let f = fitted_deaths(&p, &s).unwrap();
        assert!((f[[0, 0]] - 20.0).abs() < 1e-12);
        assert!((f[[0, 1]] - 20.0).abs() < 1e-12);
    }
}
