use std::fmt;

use thiserror::Error;

/// A single (age, year) cell of a mortality surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub age: i32,
    pub year: i32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(age {}, year {})", self.age, self.year)
    }
}

pub(crate) struct CellList<'a>(pub &'a [Cell]);

impl fmt::Display for CellList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        for (i, c) in self.0.iter().take(SHOWN).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        if self.0.len() > SHOWN {
            write!(f, " and {} more", self.0.len() - SHOWN)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate row for year {year}, age {age} (line {line})")]
    Duplicate { year: i32, age: i32, line: usize },

    #[error("ages for year {year} are not contiguous")]
    NonContiguousAges { year: i32 },

    #[error("requested rectangle is not covered: {} missing cell(s): {}", .cells.len(), CellList(.cells))]
    Coverage { cells: Vec<Cell> },

    #[error("zero exposure in {} cell(s): {}; shrink the age range", .cells.len(), CellList(.cells))]
    ZeroExposure { cells: Vec<Cell> },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("invalid range {lo}:{hi}")]
    InvalidRange { lo: i32, hi: i32 },

    #[error("cannot initialise alpha: zero deaths at {cell} with zero offset")]
    Initialization { cell: Cell },

    #[error("parameters are degenerate: {0}")]
    Degenerate(String),

    #[error("degenerate Newton step in block `{block}` at index {index}: zero curvature")]
    DegenerateStep { block: &'static str, index: usize },

    #[error("no ascent step found in block `{block}` at index {index} after {halvings} halvings")]
    NonMonotoneStep {
        block: &'static str,
        index: usize,
        halvings: u32,
    },

    #[error("log-likelihood became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("year {year} is outside the available range {first}..={last}")]
    YearOutOfRange { year: i32, first: i32, last: i32 },

    #[error("reports are not comparable: {0}")]
    Comparability(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
