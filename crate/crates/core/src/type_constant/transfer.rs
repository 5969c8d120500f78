use serde_json::{json, Value};

use super::{
    estimate_best_constant, estimate_best_constant_seeded, ConstantEstimate, EstimateConfig, Space,
    TypeConstantError,
};
use crate::carleson::condensation_search;
use crate::dyadic::{full_grid, DyadicInterval, DyadicRational, IntervalCollection};
use crate::gamlen_gaudet::{
    build_system, transfer_coefficients, verify_transfer_inequality, GamlenGaudetSystem,
    TransferInequalityReport,
};

/// Absolute slack allowed between the two estimates.
pub const TRANSFER_TOLERANCE: f64 = 2e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub system: GamlenGaudetSystem,
    /// Estimate over the index grid `D_n`.
    pub grid: ConstantEstimate,
    /// Estimate over `E`, seeded with the transferred grid witness.
    pub collection: ConstantEstimate,
    /// The grid witness pushed through the blocks.
    pub inequality: TransferInequalityReport,
    /// `(1-δ)^{-1/p}`.
    pub factor: f64,
    /// `factor · collection.lower + tolerance - grid.lower`.
    pub margin: f64,
}

impl TransferReport {
    pub fn to_json(&self) -> Value {
        json!({
            "root": self.system.root(),
            "depth": self.system.depth(),
            "delta": self.system.delta(),
            "requested_delta": self.system.requested_delta(),
            "grid": self.grid.to_json(),
            "collection": self.collection.to_json(),
            "inequality": self.inequality.to_json(),
            "factor": self.factor,
            "margin": self.margin,
        })
    }
}

/// Builds the block system on `E` (rooted at `root`, or at the densest root
/// at depth `depth` when `None`), estimates the constant over `D_n`, pushes
/// the witness onto `E`, and checks that the constant over `E` is at least
/// `(1-δ)^{1/p}` times the one over `D_n`.
pub fn check_transfer(
    collection: &IntervalCollection,
    root: Option<DyadicInterval>,
    depth: u32,
    delta: DyadicRational,
    p: f64,
    space: &Space,
    config: &EstimateConfig,
) -> Result<TransferReport, TypeConstantError> {
    let root = match root {
        Some(r) => r,
        None => condensation_search(collection, depth as usize)?.root,
    };
    let system = build_system(collection, root, depth, delta)?;
    let grid = estimate_best_constant(&full_grid(depth), p, space, config)?;
    let inequality = verify_transfer_inequality(&system, collection, &grid.witness, p, space)?;
    let seed = transfer_coefficients(&system, &grid.witness, p)?;
    let estimate = estimate_best_constant_seeded(collection, p, space, config, &[seed])?;

    let factor = (1.0 - system.delta().to_f64()).powf(-1.0 / p);
    let margin = factor * estimate.lower + TRANSFER_TOLERANCE - grid.lower;
    if margin < 0.0 {
        return Err(TypeConstantError::TransferViolated(format!(
            "estimate {} over the grid exceeds {factor} times {} over the collection",
            grid.lower, estimate.lower
        )));
    }
    Ok(TransferReport {
        system,
        grid,
        collection: estimate,
        inequality,
        factor,
        margin,
    })
}
