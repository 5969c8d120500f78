//! Exact dyadic combinatorics and Haar-type constant estimation.
//!
//! The crate is organised bottom-up: [`dyadic`] holds exact intervals,
//! rationals and step functions; [`carleson`] measures and decomposes
//! collections; [`gamlen_gaudet`] builds block systems; [`type_constant`]
//! estimates norms of the Haar synthesis operator; [`harness`] generates
//! collections and runs corpus experiments.

pub mod carleson;
pub mod dyadic;
pub mod gamlen_gaudet;
pub mod harness;
pub mod type_constant;

pub use carleson::{
    almost_disjoint_decomposition, carleson_constant, chain_structure, choose_m,
    condensation_search, generations, lemma1_upper_bound, AlmostDisjointCover, CarlesonError,
    CarlesonReport, ChainStructure, CondensationWitness, GenerationDecomposition,
};
pub use dyadic::{
    full_grid, haar, CellSet, DyadicError, DyadicInterval, DyadicRational, IntervalCollection,
    StepFunction,
};
pub use gamlen_gaudet::{
    build_system, verify_joint_distribution, GamlenGaudetError, GamlenGaudetSystem,
};
pub use harness::{generate, GeneratorSpec, HarnessError};
pub use type_constant::{
    estimate_best_constant, rayleigh_ratio, synthesize, CoefficientFamily, ConstantEstimate,
    EstimateConfig, Space, TypeConstantError, VectorStepFunction,
};
