//! Residual summaries, model comparison, synthetic surfaces and log-rate
//! curves for plotting.

use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::KappaForecast;
use crate::hmd::MortalitySurface;
use crate::lee_carter::LeeCarterParams;
use crate::likelihood::Distribution;
use crate::report::FitReport;

fn year_position(report: &FitReport, year: i32) -> Result<usize> {
    let first = report.years[0];
    let last = *report.years.last().unwrap();
    if year < first || year > last {
        return Err(Error::YearOutOfRange { year, first, last });
    }
    Ok((year - first) as usize)
}

/// Sum over ages of squared log-rate residuals for each requested year;
/// zero-death cells are skipped.
pub fn ssr_by_year(report: &FitReport, years: &[i32]) -> Result<Vec<f64>> {
    years
        .iter()
        .map(|&y| year_position(report, y).map(|j| report.ssr_by_year[j]))
        .collect()
}

/// [`ssr_by_year`] restricted to ages `age_lo..=age_hi`.
pub fn ssr_by_year_for_ages(
    report: &FitReport,
    years: &[i32],
    age_lo: i32,
    age_hi: i32,
) -> Result<Vec<f64>> {
    years
        .iter()
        .map(|&y| {
            let j = year_position(report, y)?;
            Ok(report
                .ages
                .iter()
                .enumerate()
                .filter(|(_, &a)| a >= age_lo && a <= age_hi)
                .map(|(i, _)| report.residuals_log[[i, j]])
                .filter(|r| !r.is_nan())
                .map(|r| r * r)
                .sum())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    pub distribution: Distribution,
    pub final_loglik: f64,
    pub ssr_by_year: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<ModelSummary>,
    pub years_compared: Vec<i32>,
    /// Label with the smallest SSR per year; ties go to the earliest model.
    pub winner_by_year: Vec<String>,
}

impl ComparisonReport {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Plain-text table: one row per model, one column per year.
    pub fn table(&self) -> String {
        let width = self
            .models
            .iter()
            .map(|m| m.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("{:<width$}", "Model");
        for y in &self.years_compared {
            out.push_str(&format!(" {y:>8}"));
        }
        out.push('\n');
        for m in &self.models {
            out.push_str(&format!("{:<width$}", m.label));
            for v in &m.ssr_by_year {
                out.push_str(&format!(" {v:>8.2}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<width$}", "Best"));
        for w in &self.winner_by_year {
            out.push_str(&format!(" {w:>8}"));
        }
        out.push('\n');
        out
    }
}

/// Tabulates per-year SSR for each labelled report and picks the smallest.
pub fn compare_models(reports: &[(&str, &FitReport)], years: &[i32]) -> Result<ComparisonReport> {
    let (_, first) = reports
        .first()
        .ok_or_else(|| Error::Comparability("no reports given".into()))?;
    for (label, r) in reports {
        if r.surface_fingerprint != first.surface_fingerprint
            || r.ages != first.ages
            || r.years != first.years
        {
            return Err(Error::Comparability(format!(
                "`{label}` was fitted on a different surface"
            )));
        }
    }
    let mut models = Vec::with_capacity(reports.len());
    for (label, r) in reports {
        models.push(ModelSummary {
            label: label.to_string(),
            distribution: r.distribution,
            final_loglik: r.final_loglik,
            ssr_by_year: ssr_by_year(r, years)?,
        });
    }
    let winner_by_year = (0..years.len())
        .map(|j| {
            let mut best = 0;
            for (m, summary) in models.iter().enumerate().skip(1) {
                if summary.ssr_by_year[j] < models[best].ssr_by_year[j] {
                    best = m;
                }
            }
            models[best].label.clone()
        })
        .collect();
    Ok(ComparisonReport {
        models,
        years_compared: years.to_vec(),
        winner_by_year,
    })
}

/// Draws a death surface from a Lee-Carter model.
///
/// Cell `(x, t)` has mean `E exp(alpha + beta kappa)`; negative-binomial
/// draws mix a `Gamma(shape E, rate exp(-eta))` intensity into the Poisson.
/// Each cell uses its own ChaCha stream, so the result depends only on
/// `seed`.
pub fn simulate_surface(
    params: &LeeCarterParams,
    exposures: &Array2<f64>,
    first_age: i32,
    first_year: i32,
    distribution: Distribution,
    seed: u64,
) -> Result<MortalitySurface> {
    let (n, t) = exposures.dim();
    if (n, t) != (params.n_ages(), params.n_years()) {
        return Err(Error::Dimension(format!(
            "exposures {:?} vs parameters ({}, {})",
            exposures.dim(),
            params.n_ages(),
            params.n_years()
        )));
    }
    if exposures.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidSurface("exposures must be positive".into()));
    }
    let mut deaths = Array2::zeros((n, t));
    for ((x, j), d) in deaths.indexed_iter_mut() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((x * t + j) as u64);
        let eta = params.log_rate_at(x, j);
        let e = exposures[[x, j]];
        let intensity = match distribution {
            Distribution::Poisson => e * eta.exp(),
            Distribution::NegativeBinomial => Gamma::new(e, eta.exp())
                .map_err(|err| Error::Config(format!("gamma draw: {err}")))?
                .sample(&mut rng),
        };
        *d = if intensity > 0.0 {
            Poisson::new(intensity)
                .map_err(|err| Error::Config(format!("poisson draw: {err}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
    }
    MortalitySurface::new(first_age, first_year, deaths, exposures.clone())
}

/// One fitted Lee-Carter model to draw curves from.
#[derive(Debug, Clone, Copy)]
pub struct CurveSource<'a> {
    pub label: &'a str,
    pub params: &'a LeeCarterParams,
    pub ages: &'a [i32],
    pub years: &'a [i32],
    pub forecast: Option<&'a KappaForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model: String,
    pub year: i32,
    pub age: i32,
    pub log_rate: f64,
}

/// Fitted `ln m` across ages for in-sample years and the central forecast
/// for years past the fit.
pub fn log_rate_curves(sources: &[CurveSource<'_>], years: &[i32]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for src in sources {
        let first = src.years[0];
        let last = *src.years.last().unwrap();
        for &year in years {
            let kappa = if year >= first && year <= last {
                src.params.kappa[(year - first) as usize]
            } else {
                match src.forecast {
                    Some(fc) if year > last && ((year - last) as usize) <= fc.horizon => {
                        fc.central[(year - last) as usize - 1]
                    }
                    _ => {
                        let horizon = src.forecast.map_or(0, |f| f.horizon as i32);
                        return Err(Error::YearOutOfRange {
                            year,
                            first,
                            last: last + horizon,
                        });
                    }
                }
            };
            for (x, &age) in src.ages.iter().enumerate() {
                out.push(CurvePoint {
                    model: src.label.to_string(),
                    year,
                    age,
                    log_rate: src.params.alpha[x] + src.params.beta[x] * kappa,
                });
            }
        }
    }
    Ok(out)
}

/// Writes curves as `model,year,age,log_rate`.
pub fn write_curves_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(["model", "year", "age", "log_rate"])?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
