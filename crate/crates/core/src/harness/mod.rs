//! Collection generators, the corpus runner and the end-to-end
//! reproduction run.

mod corpus;
mod generate;
mod reproduce;

use thiserror::Error;

use crate::carleson::CarlesonError;
use crate::dyadic::DyadicError;
use crate::gamlen_gaudet::GamlenGaudetError;
use crate::type_constant::TypeConstantError;

pub use corpus::{
    criterion_corpus, run_corpus, Check, CheckOutcome, CorpusConfig, ExperimentReport,
    InstanceReport,
};
pub use generate::{generate, GeneratorSpec, MAX_GENERATED_LEVEL};
pub use reproduce::{
    condensed_cascade, reproduce, CriterionResult, ReproductionReport, CASCADE_SPEC,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid generator spec {0}")]
    InvalidSpec(String),
    #[error("generator failed: {0}")]
    Generator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Carleson(#[from] CarlesonError),
    #[error(transparent)]
    GamlenGaudet(#[from] GamlenGaudetError),
    #[error(transparent)]
    TypeConstant(Box<TypeConstantError>),
}

impl From<TypeConstantError> for HarnessError {
    fn from(e: TypeConstantError) -> Self {
        HarnessError::TypeConstant(Box::new(e))
    }
}
