//! Block-coordinate Newton ascent shared by every model in the crate.
//!
//! Each model predicts a log death rate per cell that is linear in every
//! parameter taken on its own (the bilinear Lee-Carter term is linear in
//! `beta` for fixed `kappa` and vice versa). Within a block the parameters
//! touch disjoint sets of cells, so the block's log-likelihood separates into
//! one concave one-dimensional problem per parameter. A sweep walks the
//! blocks in order, takes a safeguarded Newton step for every parameter of
//! the block, and recomputes the predictor before moving on.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hmd::MortalitySurface;
use crate::likelihood::{CellLikelihood, Distribution};

/// Maximum number of step halvings before a block step is rejected.
pub const MAX_HALVINGS: u32 = 30;

/// A cell touched by a parameter, with the derivative of its log rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignCell {
    pub age: usize,
    pub year: usize,
    pub weight: f64,
}

/// A log-rate predictor organised into parameter blocks.
pub trait BlockModel: Clone {
    fn block_names(&self) -> &'static [&'static str];

    fn block_len(&self, block: usize) -> usize;

    fn param(&self, block: usize, index: usize) -> f64;

    fn param_mut(&mut self, block: usize, index: usize) -> &mut f64;

    /// `(n_ages, n_years)` of the grid the parameters describe.
    fn grid(&self) -> (usize, usize);

    fn log_rate(&self, age: usize, year: usize) -> f64;

    /// Appends every cell whose log rate depends on `param(block, index)`.
    fn design(&self, block: usize, index: usize, out: &mut Vec<DesignCell>);

    fn n_params(&self) -> usize {
        (0..self.block_names().len())
            .map(|b| self.block_len(b))
            .sum()
    }
}

pub fn log_rates<M: BlockModel>(model: &M) -> Array2<f64> {
    let (n, t) = model.grid();
    Array2::from_shape_fn((n, t), |(i, j)| model.log_rate(i, j))
}

pub(crate) fn check_grid<M: BlockModel>(model: &M, surface: &MortalitySurface) -> Result<()> {
    let want = (surface.n_ages(), surface.n_years());
    if model.grid() != want {
        return Err(Error::Dimension(format!(
            "parameters describe a {:?} grid, surface is {:?}",
            model.grid(),
            want
        )));
    }
    Ok(())
}

/// Log-likelihood of `model` for `surface` under `dist`.
pub fn loglik<M: BlockModel>(
    model: &M,
    surface: &MortalitySurface,
    dist: Distribution,
) -> Result<f64> {
    check_grid(model, surface)?;
    Ok(CellLikelihood::new(surface, dist).total(&log_rates(model)))
}

/// Analytic gradient of the log-likelihood, one vector per block.
pub fn gradient<M: BlockModel>(
    model: &M,
    surface: &MortalitySurface,
    dist: Distribution,
) -> Result<Vec<Vec<f64>>> {
    check_grid(model, surface)?;
    let lik = CellLikelihood::new(surface, dist);
    let eta = log_rates(model);
    let mut cells = Vec::new();
    Ok((0..model.block_names().len())
        .map(|b| {
            (0..model.block_len(b))
                .map(|k| {
                    cells.clear();
                    model.design(b, k, &mut cells);
                    cells
                        .iter()
                        .map(|c| {
                            c.weight * lik.score_curvature(c.age, c.year, eta[[c.age, c.year]]).0
                        })
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Which blocks a sweep visits, in order, and which parameters stay fixed.
#[derive(Debug, Clone)]
pub(crate) struct SweepPlan {
    pub order: Vec<usize>,
    /// `frozen[block][index]`; missing entries are free.
    pub frozen: Vec<Vec<bool>>,
}

impl SweepPlan {
    pub(crate) fn all<M: BlockModel>(model: &M, order: Vec<usize>) -> Self {
        let frozen = (0..model.block_names().len())
            .map(|b| vec![false; model.block_len(b)])
            .collect();
        Self { order, frozen }
    }

    fn is_frozen(&self, block: usize, index: usize) -> bool {
        self.frozen
            .get(block)
            .and_then(|f| f.get(index))
            .copied()
            .unwrap_or(false)
    }
}

/// Safeguarded one-dimensional Newton step for a single parameter.
///
/// Returns the accepted change of the parameter. `eta` is the predictor at
/// the current parameters.
fn newton_step(
    lik: &CellLikelihood<'_>,
    eta: &Array2<f64>,
    cells: &[DesignCell],
    block: &'static str,
    index: usize,
) -> Result<f64> {
    let (mut grad, mut curv) = (0.0, 0.0);
    for c in cells {
        let (s, h) = lik.score_curvature(c.age, c.year, eta[[c.age, c.year]]);
        grad += c.weight * s;
        curv += c.weight * c.weight * h;
    }
    if !(curv > 0.0) || !curv.is_finite() {
        return Err(Error::DegenerateStep { block, index });
    }
    if grad == 0.0 {
        return Ok(0.0);
    }
    let full = grad / curv;

    let objective = |step: f64| -> f64 {
        cells
            .iter()
            .map(|c| lik.centred(c.age, c.year, eta[[c.age, c.year]] + step * c.weight))
            .sum()
    };
    let base = objective(0.0);
    let mut step = full;
    for _ in 0..=MAX_HALVINGS {
        let trial = objective(step);
        if trial >= base {
            return Ok(step);
        }
        step *= 0.5;
    }

    // Every halving lost ground. When the predicted gain of the smallest
    // step is below the rounding noise of the objective the parameter is
    // already stationary, so keep it.
    let predicted = grad * step;
    let noise = 1e3 * f64::EPSILON * (base.abs() + cells.len() as f64);
    if predicted <= noise {
        return Ok(0.0);
    }
    Err(Error::NonMonotoneStep {
        block,
        index,
        halvings: MAX_HALVINGS,
    })
}

/// Updates one block in place and returns the refreshed predictor.
pub(crate) fn update_block<M: BlockModel>(
    model: &mut M,
    lik: &CellLikelihood<'_>,
    plan: &SweepPlan,
    block: usize,
    eta: Array2<f64>,
) -> Result<Array2<f64>> {
    let name = model.block_names()[block];
    let mut cells = Vec::new();
    let mut steps = vec![0.0; model.block_len(block)];
    for (k, step) in steps.iter_mut().enumerate() {
        if plan.is_frozen(block, k) {
            continue;
        }
        cells.clear();
        model.design(block, k, &mut cells);
        *step = newton_step(lik, &eta, &cells, name, k)?;
    }
    for (k, step) in steps.into_iter().enumerate() {
        *model.param_mut(block, k) += step;
    }
    Ok(log_rates(model))
}

/// One full pass over the plan's blocks.
pub(crate) fn sweep<M: BlockModel>(
    model: &M,
    lik: &CellLikelihood<'_>,
    plan: &SweepPlan,
) -> Result<M> {
    let mut next = model.clone();
    let mut eta = log_rates(&next);
    for &block in &plan.order {
        eta = update_block(&mut next, lik, plan, block, eta)?;
    }
    Ok(next)
}

/// Outcome of iterating sweeps to convergence.
#[derive(Debug, Clone)]
pub(crate) struct Ascent<M> {
    pub model: M,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Repeats sweeps until the relative log-likelihood change drops below
/// `tol` or `max_iterations` sweeps have run. `trace[0]` is the starting
/// log-likelihood.
pub(crate) fn ascend<M: BlockModel>(
    start: M,
    lik: &CellLikelihood<'_>,
    plan: &SweepPlan,
    tol: f64,
    max_iterations: usize,
) -> Result<Ascent<M>> {
    let mut model = start;
    let mut current = lik.total(&log_rates(&model));
    if !current.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        model = sweep(&model, lik, plan)?;
        let next = lik.total(&log_rates(&model));
        if !next.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
            });
        }
        trace.push(next);
        let change = (next - current).abs() / (1.0 + next.abs());
        current = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(Ascent {
        model,
        trace,
        iterations,
        converged,
    })
}
