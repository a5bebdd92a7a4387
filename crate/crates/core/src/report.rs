use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hmd::MortalitySurface;
use crate::likelihood::Distribution;
use crate::model::{self, BlockModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LeeCarter,
    RenshawHaberman,
    Plat,
}

/// Result of a maximum-likelihood fit.
///
/// The matrices are not part of the JSON form; [`FitReport::write_cells_csv`]
/// exports them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub distribution: Distribution,
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood before the first sweep followed by one entry per sweep.
    pub loglik_trace: Vec<f64>,
    pub ages: Vec<i32>,
    pub years: Vec<i32>,
    /// Sum over ages of squared log-rate residuals, per year.
    pub ssr_by_year: Vec<f64>,
    /// Cells with zero observed deaths, which carry no log residual.
    pub zero_death_cells: usize,
    pub surface_fingerprint: String,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub fitted_deaths: Array2<f64>,
    /// `ln m_obs - ln m_fit`; NaN where no deaths were observed.
    #[serde(skip)]
    pub residuals_log: Array2<f64>,
    /// Fitted `ln m` per cell.
    #[serde(skip)]
    pub fitted_log_rates: Array2<f64>,
}

impl FitReport {
    pub(crate) fn build(
        model: ModelKind,
        distribution: Distribution,
        surface: &MortalitySurface,
        fitted_log_rates: Array2<f64>,
        trace: Vec<f64>,
        iterations: usize,
        converged: bool,
        notes: Vec<String>,
    ) -> Self {
        let d = surface.deaths();
        let e = surface.exposures();
        let fitted_deaths =
            Array2::from_shape_fn(d.dim(), |(x, t)| e[[x, t]] * fitted_log_rates[[x, t]].exp());
        let residuals_log = Array2::from_shape_fn(d.dim(), |(x, t)| {
            let obs = d[[x, t]];
            if obs > 0.0 {
                (obs / e[[x, t]]).ln() - fitted_log_rates[[x, t]]
            } else {
                f64::NAN
            }
        });
        let ssr_by_year = residuals_log
            .columns()
            .into_iter()
            .map(|col| col.iter().filter(|r| !r.is_nan()).map(|r| r * r).sum())
            .collect();
        let zero_death_cells = d.iter().filter(|&&v| v == 0.0).count();
        Self {
            model,
            distribution,
            final_loglik: *trace.last().expect("trace holds the starting value"),
            iterations,
            converged,
            loglik_trace: trace,
            ages: surface.ages().to_vec(),
            years: surface.years().to_vec(),
            ssr_by_year,
            zero_death_cells,
            surface_fingerprint: surface.fingerprint(),
            notes,
            fitted_deaths,
            residuals_log,
            fitted_log_rates,
        }
    }

    /// Report for fixed parameters: no iterations, the trace holds the one
    /// log-likelihood value.
    pub fn evaluate<M: BlockModel>(
        kind: ModelKind,
        params: &M,
        surface: &MortalitySurface,
        distribution: Distribution,
    ) -> Result<Self> {
        let lnl = model::loglik(params, surface, distribution)?;
        Ok(Self::build(
            kind,
            distribution,
            surface,
            model::log_rates(params),
            vec![lnl],
            0,
            true,
            vec!["evaluated at the given parameters; not fitted".into()],
        ))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Writes `age,year,fitted_deaths,log_residual`; the residual column is
    /// empty for zero-death cells.
    pub fn write_cells_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["age", "year", "fitted_deaths", "log_residual"])?;
        for (x, age) in self.ages.iter().enumerate() {
            for (t, year) in self.years.iter().enumerate() {
                let r = self.residuals_log[[x, t]];
                let r = if r.is_nan() { None } else { Some(r) };
                w.serialize((age, year, self.fitted_deaths[[x, t]], r))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) const ASCENT_NOTE: &str =
    "block updates step along +gradient/|curvature| (Newton ascent), with step halving";
