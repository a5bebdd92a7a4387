//! Cohort extensions of Lee-Carter, fitted under Poisson death counts.
//!
//! Renshaw-Haberman: `ln m = alpha[x] + beta0[x] gamma[t-x] + beta1[x] kappa[t]`.
//!
//! Plat: `ln m = alpha[x] + k1[t] + k2[t] (xbar - x) + k3[t] (xbar - x)+ + gamma[t-x]`.
//!
//! Cohorts are indexed from the oldest, `c_min = t_min - x_max`, so cohort
//! index `k = j - i + (n_ages - 1)` for age index `i` and year index `j`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmd::MortalitySurface;
use crate::lee_carter::{fit_lee_carter, init_params, FitConfig};
use crate::likelihood::{CellLikelihood, Distribution};
use crate::model::{self, BlockModel, DesignCell, SweepPlan};
use crate::report::{FitReport, ModelKind, ASCENT_NOTE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    /// Cohorts observed in fewer cells keep `gamma = 0`.
    pub min_cohort_obs: usize,
    /// Hold every cohort-related block at zero, leaving the nested
    /// period-only model.
    pub freeze_cohort: bool,
}

impl Default for CohortOptions {
    fn default() -> Self {
        Self {
            min_cohort_obs: 1,
            freeze_cohort: false,
        }
    }
}

#[inline]
fn cohort_index(n_ages: usize, age: usize, year: usize) -> usize {
    year + n_ages - 1 - age
}

fn cohort_cells(n_ages: usize, n_years: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    // j - i = k - (n - 1)
    (0..n_ages).filter_map(move |i| {
        let j = (k + i).checked_sub(n_ages - 1)?;
        (j < n_years).then_some((i, j))
    })
}

/// Number of cells on each cohort diagonal.
pub fn cohort_counts(n_ages: usize, n_years: usize) -> Vec<usize> {
    (0..n_ages + n_years - 1)
        .map(|k| cohort_cells(n_ages, n_years, k).count())
        .collect()
}

/// Birth-year labels of the cohorts of `surface`, oldest first.
pub fn cohort_labels(surface: &MortalitySurface) -> Vec<i32> {
    let c_min = surface.years()[0] - surface.ages()[surface.n_ages() - 1];
    (0..(surface.n_ages() + surface.n_years() - 1) as i32)
        .map(|k| c_min + k)
        .collect()
}

fn write_cohort_csv<W: Write>(labels: &[i32], gamma: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cohort", "gamma"])?;
    for (c, g) in labels.iter().zip(gamma) {
        w.serialize((c, g))?;
    }
    w.flush()?;
    Ok(())
}

fn cohort_notes(counts: &[usize], labels: &[i32], options: &CohortOptions) -> Vec<String> {
    let single: Vec<String> = counts
        .iter()
        .zip(labels)
        .filter(|(&n, _)| n == 1)
        .map(|(_, c)| c.to_string())
        .collect();
    let mut notes = vec![ASCENT_NOTE.to_string()];
    if !single.is_empty() {
        notes.push(format!(
            "cohorts with a single observed cell: {}",
            single.join(", ")
        ));
    }
    if options.min_cohort_obs > 1 {
        notes.push(format!(
            "cohorts with fewer than {} cells held at gamma = 0",
            options.min_cohort_obs
        ));
    }
    if options.freeze_cohort {
        notes.push("cohort blocks frozen at zero".into());
    }
    notes
}

// ---------------------------------------------------------------------------
// Renshaw-Haberman

#[derive(Debug, Clone, PartialEq)]
pub struct RenshawHabermanParams {
    pub alpha: Vec<f64>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Indexed oldest cohort first.
    pub gamma: Vec<f64>,
}

const RH_ALPHA: usize = 0;
const RH_GAMMA: usize = 1;
const RH_BETA0: usize = 2;
const RH_BETA1: usize = 3;
const RH_KAPPA: usize = 4;

impl RenshawHabermanParams {
    pub fn write_csvs<A: Write, Y: Write, C: Write>(
        &self,
        surface: &MortalitySurface,
        ages: A,
        years: Y,
        cohorts: C,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(ages);
        w.write_record(["age", "alpha", "beta0", "beta1"])?;
        for (x, age) in surface.ages().iter().enumerate() {
            w.serialize((age, self.alpha[x], self.beta0[x], self.beta1[x]))?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(years);
        w.write_record(["year", "kappa"])?;
        for (year, k) in surface.years().iter().zip(&self.kappa) {
            w.serialize((year, k))?;
        }
        w.flush()?;
        write_cohort_csv(&cohort_labels(surface), &self.gamma, cohorts)
    }
}

impl BlockModel for RenshawHabermanParams {
    fn block_names(&self) -> &'static [&'static str] {
        &["alpha", "gamma", "beta0", "beta1", "kappa"]
    }

    fn block_len(&self, block: usize) -> usize {
        match block {
            RH_GAMMA => self.gamma.len(),
            RH_KAPPA => self.kappa.len(),
            _ => self.alpha.len(),
        }
    }

    fn param(&self, block: usize, index: usize) -> f64 {
        match block {
            RH_ALPHA => self.alpha[index],
            RH_GAMMA => self.gamma[index],
            RH_BETA0 => self.beta0[index],
            RH_BETA1 => self.beta1[index],
            _ => self.kappa[index],
        }
    }

    fn param_mut(&mut self, block: usize, index: usize) -> &mut f64 {
        match block {
            RH_ALPHA => &mut self.alpha[index],
            RH_GAMMA => &mut self.gamma[index],
            RH_BETA0 => &mut self.beta0[index],
            RH_BETA1 => &mut self.beta1[index],
            _ => &mut self.kappa[index],
        }
    }

    fn grid(&self) -> (usize, usize) {
        (self.alpha.len(), self.kappa.len())
    }

    fn log_rate(&self, age: usize, year: usize) -> f64 {
        let k = cohort_index(self.alpha.len(), age, year);
        self.alpha[age] + self.beta0[age] * self.gamma[k] + self.beta1[age] * self.kappa[year]
    }

    fn design(&self, block: usize, index: usize, out: &mut Vec<DesignCell>) {
        let (n, t) = self.grid();
        let row = |w: &dyn Fn(usize) -> f64, out: &mut Vec<DesignCell>| {
            out.extend((0..t).map(|j| DesignCell {
                age: index,
                year: j,
                weight: w(j),
            }))
        };
        match block {
            RH_ALPHA => row(&|_| 1.0, out),
            RH_BETA0 => row(&|j| self.gamma[cohort_index(n, index, j)], out),
            RH_BETA1 => row(&|j| self.kappa[j], out),
            RH_GAMMA => out.extend(cohort_cells(n, t, index).map(|(i, j)| DesignCell {
                age: i,
                year: j,
                weight: self.beta0[i],
            })),
            _ => out.extend((0..n).map(|i| DesignCell {
                age: i,
                year: index,
                weight: self.beta1[i],
            })),
        }
    }
}

/// Imposes `gamma[c_min] = 0`, `sum beta0 = 1`, `sum kappa = 0` and
/// `sum beta1 = 1` without changing any fitted rate.
pub fn rh_normalize(params: &RenshawHabermanParams) -> Result<RenshawHabermanParams> {
    let mut p = params.clone();
    let anchor = p.gamma[0];
    for g in &mut p.gamma {
        *g -= anchor;
    }
    for (a, b0) in p.alpha.iter_mut().zip(&p.beta0) {
        *a += b0 * anchor;
    }
    let s0: f64 = p.beta0.iter().sum();
    let s1: f64 = p.beta1.iter().sum();
    if s0 == 0.0 || s1 == 0.0 || !s0.is_finite() || !s1.is_finite() {
        return Err(Error::Degenerate(format!(
            "sum of beta0 is {s0}, sum of beta1 is {s1}; cannot normalise"
        )));
    }
    p.beta0.iter_mut().for_each(|b| *b /= s0);
    p.gamma.iter_mut().for_each(|g| *g *= s0);
    p.gamma[0] = 0.0;

    let mean = p.kappa.iter().sum::<f64>() / p.kappa.len() as f64;
    for (a, b1) in p.alpha.iter_mut().zip(&p.beta1) {
        *a += b1 * mean;
    }
    p.beta1.iter_mut().for_each(|b| *b /= s1);
    p.kappa.iter_mut().for_each(|k| *k = s1 * (*k - mean));
    Ok(p)
}

/// `E * exp(alpha + beta0 gamma + beta1 kappa)` on every cell.
pub fn rh_fitted_deaths(
    params: &RenshawHabermanParams,
    surface: &MortalitySurface,
) -> Result<ndarray::Array2<f64>> {
    model::check_grid(params, surface)?;
    Ok(surface.exposures() * &model::log_rates(params).mapv(f64::exp))
}

fn frozen_cohorts(counts: &[usize], options: &CohortOptions) -> Vec<bool> {
    counts
        .iter()
        .map(|&n| options.freeze_cohort || n < options.min_cohort_obs)
        .collect()
}

/// Fits Renshaw-Haberman, starting from the Poisson Lee-Carter fit with
/// `beta0 = 1/N` and `gamma = 0`.
pub fn fit_rh(
    surface: &MortalitySurface,
    config: &FitConfig,
    options: &CohortOptions,
) -> Result<(RenshawHabermanParams, FitReport)> {
    config.validate()?;
    let (n, t) = (surface.n_ages(), surface.n_years());
    if t < 2 {
        return Err(Error::InsufficientData { needed: 2, got: t });
    }
    let (lc, _) = fit_lee_carter(surface, config, Distribution::Poisson)?;
    let start = RenshawHabermanParams {
        alpha: lc.alpha,
        beta0: vec![1.0 / n as f64; n],
        beta1: lc.beta,
        kappa: lc.kappa,
        gamma: vec![0.0; n + t - 1],
    };
    let counts = cohort_counts(n, t);
    let mut plan = SweepPlan::all(
        &start,
        vec![RH_ALPHA, RH_GAMMA, RH_BETA0, RH_BETA1, RH_KAPPA],
    );
    plan.frozen[RH_GAMMA] = frozen_cohorts(&counts, options);
    if options.freeze_cohort {
        plan.frozen[RH_BETA0] = vec![true; n];
    }

    let lik = CellLikelihood::new(surface, Distribution::Poisson);
    let ascent = model::ascend(
        start,
        &lik,
        &plan,
        config.loglik_rel_tolerance,
        config.max_iterations,
    )?;
    let mut fitted = ascent.model;
    if options.freeze_cohort {
        // beta0 is not identified while gamma is zero; keep it flat
        fitted.beta0 = vec![1.0 / n as f64; n];
    }
    let params = rh_normalize(&fitted)?;
    let report = FitReport::build(
        ModelKind::RenshawHaberman,
        Distribution::Poisson,
        surface,
        model::log_rates(&params),
        ascent.trace,
        ascent.iterations,
        ascent.converged,
        cohort_notes(&counts, &cohort_labels(surface), options),
    );
    Ok((params, report))
}

// ---------------------------------------------------------------------------
// Plat

#[derive(Debug, Clone, PartialEq)]
pub struct PlatParams {
    pub alpha: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub kappa3: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Mean age of the fitted range.
    pub x_bar: f64,
    /// `xbar - x` for every age index.
    offsets: Vec<f64>,
}

const PLAT_ALPHA: usize = 0;
const PLAT_GAMMA: usize = 1;
const PLAT_K1: usize = 2;
const PLAT_K2: usize = 3;
const PLAT_K3: usize = 4;

impl PlatParams {
    /// All-zero period and cohort terms on the age labels `ages`.
    pub fn zeros(ages: &[i32], n_years: usize) -> Self {
        let n = ages.len();
        let x_bar = ages.iter().map(|&a| a as f64).sum::<f64>() / n as f64;
        Self {
            alpha: vec![0.0; n],
            kappa1: vec![0.0; n_years],
            kappa2: vec![0.0; n_years],
            kappa3: vec![0.0; n_years],
            gamma: vec![0.0; n + n_years - 1],
            x_bar,
            offsets: ages.iter().map(|&a| x_bar - a as f64).collect(),
        }
    }

    /// `xbar - x` for age index `age`.
    pub fn offset(&self, age: usize) -> f64 {
        self.offsets[age]
    }

    /// `max(xbar - x, 0)` for age index `age`.
    pub fn young_offset(&self, age: usize) -> f64 {
        self.offsets[age].max(0.0)
    }

    pub fn write_csvs<A: Write, Y: Write, C: Write>(
        &self,
        surface: &MortalitySurface,
        ages: A,
        years: Y,
        cohorts: C,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(ages);
        w.write_record(["age", "alpha"])?;
        for (age, a) in surface.ages().iter().zip(&self.alpha) {
            w.serialize((age, a))?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(years);
        w.write_record(["year", "kappa1", "kappa2", "kappa3"])?;
        for (j, year) in surface.years().iter().enumerate() {
            w.serialize((year, self.kappa1[j], self.kappa2[j], self.kappa3[j]))?;
        }
        w.flush()?;
        write_cohort_csv(&cohort_labels(surface), &self.gamma, cohorts)
    }
}

impl BlockModel for PlatParams {
    fn block_names(&self) -> &'static [&'static str] {
        &["alpha", "gamma", "kappa1", "kappa2", "kappa3"]
    }

    fn block_len(&self, block: usize) -> usize {
        match block {
            PLAT_ALPHA => self.alpha.len(),
            PLAT_GAMMA => self.gamma.len(),
            _ => self.kappa1.len(),
        }
    }

    fn param(&self, block: usize, index: usize) -> f64 {
        match block {
            PLAT_ALPHA => self.alpha[index],
            PLAT_GAMMA => self.gamma[index],
            PLAT_K1 => self.kappa1[index],
            PLAT_K2 => self.kappa2[index],
            _ => self.kappa3[index],
        }
    }

    fn param_mut(&mut self, block: usize, index: usize) -> &mut f64 {
        match block {
            PLAT_ALPHA => &mut self.alpha[index],
            PLAT_GAMMA => &mut self.gamma[index],
            PLAT_K1 => &mut self.kappa1[index],
            PLAT_K2 => &mut self.kappa2[index],
            _ => &mut self.kappa3[index],
        }
    }

    fn grid(&self) -> (usize, usize) {
        (self.alpha.len(), self.kappa1.len())
    }

    fn log_rate(&self, age: usize, year: usize) -> f64 {
        let k = cohort_index(self.alpha.len(), age, year);
        self.alpha[age]
            + self.kappa1[year]
            + self.kappa2[year] * self.offset(age)
            + self.kappa3[year] * self.young_offset(age)
            + self.gamma[k]
    }

    fn design(&self, block: usize, index: usize, out: &mut Vec<DesignCell>) {
        let (n, t) = self.grid();
        let column = |w: &dyn Fn(usize) -> f64, out: &mut Vec<DesignCell>| {
            out.extend((0..n).map(|i| DesignCell {
                age: i,
                year: index,
                weight: w(i),
            }))
        };
        match block {
            PLAT_ALPHA => out.extend((0..t).map(|j| DesignCell {
                age: index,
                year: j,
                weight: 1.0,
            })),
            PLAT_GAMMA => out.extend(cohort_cells(n, t, index).map(|(i, j)| DesignCell {
                age: i,
                year: j,
                weight: 1.0,
            })),
            PLAT_K1 => column(&|_| 1.0, out),
            PLAT_K2 => column(&|i| self.offset(i), out),
            _ => column(&|i| self.young_offset(i), out),
        }
    }
}

/// Imposes `sum gamma = 0`, `sum c gamma = 0`, `sum c^2 gamma = 0` and
/// `sum k1 = sum k2 = sum k3 = 0` without changing any fitted rate.
///
/// A quadratic in the cohort index splits into age, period and
/// age-times-period parts, so it moves out of `gamma` into `alpha`, `k1`
/// and `k2`.
pub fn plat_normalize(params: &PlatParams) -> PlatParams {
    let mut p = params.clone();
    let (n, t) = p.grid();

    // projection of gamma on 1, u, u^2 - mean(u^2) with u the centred
    // cohort index; the three are orthogonal over a symmetric range
    let m = p.gamma.len() as f64;
    let k_mean = (m - 1.0) / 2.0;
    let u = |k: usize| k as f64 - k_mean;
    let s2 = (0..p.gamma.len()).map(|k| u(k).powi(2)).sum::<f64>() / m;
    let (mut g0, mut g1, mut g2, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, g) in p.gamma.iter().enumerate() {
        let q = u(k).powi(2) - s2;
        g0 += g;
        g1 += g * u(k);
        g2 += g * q;
        n1 += u(k).powi(2);
        n2 += q * q;
    }
    let a = g0 / m;
    let b = if n1 > 0.0 { g1 / n1 } else { 0.0 };
    let c = if n2 > 0.0 { g2 / n2 } else { 0.0 };
    for (k, g) in p.gamma.iter_mut().enumerate() {
        *g -= a + b * u(k) + c * (u(k).powi(2) - s2);
    }

    // u = j - i + shift; i = half - offset
    let shift = (n as f64 - t as f64) / 2.0;
    let half = (n as f64 - 1.0) / 2.0;
    for (i, alpha) in p.alpha.iter_mut().enumerate() {
        let i = i as f64;
        *alpha += -b * i + c * i * i;
    }
    for j in 0..t {
        let v = j as f64 + shift;
        p.kappa1[j] += a - c * s2 + b * v + c * v * v - 2.0 * c * half * v;
        p.kappa2[j] += 2.0 * c * v;
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2, m3) = (mean(&p.kappa1), mean(&p.kappa2), mean(&p.kappa3));
    for i in 0..n {
        p.alpha[i] += m1 + m2 * p.offset(i) + m3 * p.young_offset(i);
    }
    p.kappa1.iter_mut().for_each(|k| *k -= m1);
    p.kappa2.iter_mut().for_each(|k| *k -= m2);
    p.kappa3.iter_mut().for_each(|k| *k -= m3);
    p
}

/// `E * exp` of the Plat predictor on every cell.
pub fn plat_fitted_deaths(
    params: &PlatParams,
    surface: &MortalitySurface,
) -> Result<ndarray::Array2<f64>> {
    model::check_grid(params, surface)?;
    Ok(surface.exposures() * &model::log_rates(params).mapv(f64::exp))
}

/// Fits the Plat model starting from the Lee-Carter level `alpha` with all
/// period and cohort terms at zero.
pub fn fit_plat(
    surface: &MortalitySurface,
    config: &FitConfig,
    options: &CohortOptions,
) -> Result<(PlatParams, FitReport)> {
    config.validate()?;
    let (n, t) = (surface.n_ages(), surface.n_years());
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut start = PlatParams::zeros(surface.ages(), t);
    start.alpha = init_params(surface, config.zero_death_offset)?.alpha;

    let counts = cohort_counts(n, t);
    let mut plan = SweepPlan::all(
        &start,
        vec![PLAT_ALPHA, PLAT_GAMMA, PLAT_K1, PLAT_K2, PLAT_K3],
    );
    plan.frozen[PLAT_GAMMA] = frozen_cohorts(&counts, options);
    if options.freeze_cohort {
        plan.frozen[PLAT_K2] = vec![true; t];
        plan.frozen[PLAT_K3] = vec![true; t];
    }

    let lik = CellLikelihood::new(surface, Distribution::Poisson);
    let ascent = model::ascend(
        start,
        &lik,
        &plan,
        config.loglik_rel_tolerance,
        config.max_iterations,
    )?;
    let params = plat_normalize(&ascent.model);
    let report = FitReport::build(
        ModelKind::Plat,
        Distribution::Poisson,
        surface,
        model::log_rates(&params),
        ascent.trace,
        ascent.iterations,
        ascent.converged,
        cohort_notes(&counts, &cohort_labels(surface), options),
    );
    Ok((params, report))
}
