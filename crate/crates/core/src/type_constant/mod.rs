//! The synthesis operator `(x_I) ↦ Σ x_I h_I/|I|^{1/p}` with values in a
//! finite-dimensional `ℓ^q`, certified lower bounds for its norm by nonlinear
//! power iteration, and the two checks built on it: the closed-form upper
//! bound over collections of finite Carleson constant, and the transfer of
//! witnesses through a block system.

mod estimate;
mod space;
mod synthesis;
mod transfer;

use thiserror::Error;

use crate::carleson::CarlesonError;
use crate::dyadic::{DyadicError, DyadicInterval};
use crate::gamlen_gaudet::GamlenGaudetError;

pub(crate) use estimate::check_exponent;
pub use estimate::{
    check_lemma1, estimate_best_constant, estimate_best_constant_seeded, l1_witness_family,
    l1_witness_ratio, ConstantEstimate, EstimateConfig, Lemma1Report, LEMMA1_TOLERANCE,
};
pub use space::Space;
pub use synthesis::{
    rayleigh_ratio, synthesize, CoefficientFamily, SynthesisOperator, VectorStepFunction,
};
pub use transfer::{check_transfer, TransferReport, TRANSFER_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeConstantError {
    #[error("coefficient on {0} lies outside the collection")]
    SupportOutsideCollection(DyadicInterval),
    #[error("all coefficients vanish")]
    ZeroCoefficients,
    #[error("exponent p = {0} must lie in (1, 2]")]
    InvalidExponent(f64),
    #[error("collection is empty")]
    EmptyCollection,
    #[error("expected vectors of dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("resolution mismatch: expected {expected}, found {found}")]
    ResolutionMismatch { expected: u32, found: u32 },
    #[error("invalid space `{0}`; expected scalar, lQ:DIM or linf:DIM")]
    InvalidSpace(String),
    #[error("lower bound {lower} exceeds upper bound {upper}")]
    Lemma1Violated { lower: f64, upper: f64 },
    #[error("transfer violated: {0}")]
    TransferViolated(String),
    #[error(transparent)]
    Carleson(#[from] CarlesonError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    GamlenGaudet(Box<GamlenGaudetError>),
}

impl From<GamlenGaudetError> for TypeConstantError {
    fn from(e: GamlenGaudetError) -> Self {
        TypeConstantError::GamlenGaudet(Box::new(e))
    }
}

#[cfg(test)]
mod tests;
