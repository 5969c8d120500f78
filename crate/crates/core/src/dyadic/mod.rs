//! Exact dyadic primitives: intervals, rationals, step functions on dyadic
//! grids, Haar functions and the interval text format.

mod collection;
mod interval;
mod rational;
mod step;
mod text;

pub use collection::{full_grid, IntervalCollection};
pub use interval::{DyadicInterval, Half, Relation, MAX_LEVEL};
pub use rational::DyadicRational;
pub use step::{haar, CellSet, StepFunction, MAX_RESOLUTION};
pub use text::{format_intervals, parse_intervals};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("index {index} out of range for level {level}")]
    IndexOutOfRange { level: u32, index: u64 },
    #[error("level {level} exceeds the maximum level {max}")]
    LevelTooDeep { level: u32, max: u32 },
    #[error("resolution {resolution} cannot represent both halves of a level-{level} interval")]
    ResolutionTooCoarse { level: u32, resolution: u32 },
    #[error("resolution {resolution} exceeds the maximum resolution {max}")]
    ResolutionTooFine { resolution: u32, max: u32 },
    #[error("cannot refine from resolution {from} down to {to}")]
    CoarserResolution { from: u32, to: u32 },
    #[error("expected {expected} cells, found {found}")]
    CellCount { expected: usize, found: usize },
    #[error("duplicate interval {0}")]
    Duplicate(DyadicInterval),
    #[error("line {line}: expected `level index`, got {content:?}")]
    Parse { line: usize, content: String },
    #[error("{0:?} is not a dyadic rational")]
    NotDyadic(String),
    #[error("dyadic rational out of range")]
    Overflow,
}
