use serde::Serialize;
use serde_json::{json, Value};

use super::GamlenGaudetSystem;
use crate::dyadic::{full_grid, IntervalCollection};
use crate::type_constant::{
    check_exponent, rayleigh_ratio, synthesize, CoefficientFamily, Space, SynthesisOperator,
    TypeConstantError,
};

/// Moves coefficients indexed by `D_n` onto the blocks:
/// `y_K = (|K|/|I|)^{1/p} x_I` for every `K ∈ B_I`, zero elsewhere.
pub fn transfer_coefficients(
    system: &GamlenGaudetSystem,
    x: &CoefficientFamily,
    p: f64,
) -> Result<CoefficientFamily, TypeConstantError> {
    check_exponent(p)?;
    let mut y = CoefficientFamily::new(x.dim());
    for (index, value) in x.iter() {
        let blocks = system
            .blocks(index)
            .ok_or(TypeConstantError::SupportOutsideCollection(*index))?;
        for k in blocks {
            let factor = 2f64.powf((index.level() as f64 - k.level() as f64) / p);
            y.set(*k, value.iter().map(|v| factor * v).collect())?;
        }
    }
    Ok(y)
}

/// Both sides of the transfer estimate for one coefficient family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferInequalityReport {
    /// `‖Σ_{D_n} x_I h_I/|I|^{1/p}‖_{L^p_X}`.
    pub haar_norm: f64,
    /// `(|S|^{-1} ∫_S ‖Σ_E y_K h_K/|K|^{1/p}‖^p)^{1/p}`; equals `haar_norm`
    /// because the block sums copy the Haar distribution on `S`.
    pub support_norm: f64,
    /// `|S|^{-1/p} ‖Σ_E y_K h_K/|K|^{1/p}‖_{L^p_X}`.
    pub scaled_block_norm: f64,
    /// Largest cell gap between the block synthesis of `y` and `Σ x_I k_I/|I|^{1/p}`.
    pub pointwise_gap: f64,
    /// `Σ‖x_I‖^p`.
    pub x_mass: f64,
    /// `|S|^{-1} Σ‖y_K‖^p`.
    pub y_mass: f64,
    /// `(1-δ)^{-1}`.
    pub mass_factor: f64,
    pub ratio_grid: f64,
    pub ratio_blocks: f64,
    /// `(1-δ)^{1/p}`.
    pub ratio_factor: f64,
}

impl TransferInequalityReport {
    pub fn to_json(&self) -> Value {
        json!(self)
    }
}

const RELATIVE: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RELATIVE * a.abs().max(b.abs()).max(1.0)
}

/// Evaluates every link of the transfer estimate for `x` and fails if one
/// breaks beyond `1e-9` relative.
pub fn verify_transfer_inequality(
    system: &GamlenGaudetSystem,
    collection: &IntervalCollection,
    x: &CoefficientFamily,
    p: f64,
    space: &Space,
) -> Result<TransferInequalityReport, TypeConstantError> {
    check_exponent(p)?;
    if x.dim() != space.dim() {
        return Err(TypeConstantError::DimensionMismatch {
            expected: space.dim(),
            found: x.dim(),
        });
    }
    let dim = x.dim();
    let y = transfer_coefficients(system, x, p)?;
    if let Some((k, _)) = y.iter().find(|(k, _)| !collection.contains(k)) {
        return Err(TypeConstantError::SupportOutsideCollection(*k));
    }
    let res = system.resolution();
    let s_measure = system.support().measure().to_f64();
    let one_minus = 1.0 - system.delta().to_f64();

    let grid = full_grid(system.depth());
    let haar_norm = synthesize(&grid, x, p)?.lp_norm(p, space);

    let op = SynthesisOperator::new(y.support().to_vec(), p, dim, res)?;
    let f = op.synthesize(&y)?;
    let support_norm = f.normalized_lp_norm_on(system.support(), p, space)?;
    let scaled_block_norm = f.lp_norm(p, space) / s_measure.powf(1.0 / p);

    // Same function through the block sums: Σ_I x_I |I|^{-1/p} k_I.
    let mut g = vec![0.0; (1usize << res) * dim];
    for (index, value) in x.iter() {
        let scale = 2f64.powf(index.level() as f64 / p);
        let signs = system
            .signs(index)
            .expect("x is supported on the index grid");
        for (c, s) in signs.iter().enumerate().filter(|(_, s)| **s != 0) {
            for (j, v) in value.iter().enumerate() {
                g[c * dim + j] += *s as f64 * scale * v;
            }
        }
    }
    let mut pointwise_gap = 0.0f64;
    for c in 0..(1usize << res) {
        for j in 0..dim {
            pointwise_gap = pointwise_gap.max((f.cell(c)[j] - g[c * dim + j]).abs());
        }
    }

    let x_mass = x.mass(p, space);
    let y_mass = y.mass(p, space) / s_measure;
    let (ratio_grid, ratio_blocks) = if x.is_zero() {
        (0.0, 0.0)
    } else {
        (
            rayleigh_ratio(&grid, x, p, space)?,
            rayleigh_ratio(collection, &y, p, space)?,
        )
    };
    let report = TransferInequalityReport {
        haar_norm,
        support_norm,
        scaled_block_norm,
        pointwise_gap,
        x_mass,
        y_mass,
        mass_factor: 1.0 / one_minus,
        ratio_grid,
        ratio_blocks,
        ratio_factor: one_minus.powf(1.0 / p),
    };

    let peak = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if pointwise_gap > RELATIVE * peak {
        return Err(TypeConstantError::TransferViolated(format!(
            "block sums differ by {pointwise_gap} on a cell"
        )));
    }
    if !close(support_norm, haar_norm) {
        return Err(TypeConstantError::TransferViolated(format!(
            "norm on S is {support_norm}, Haar norm is {haar_norm}"
        )));
    }
    if haar_norm > scaled_block_norm * (1.0 + RELATIVE) + RELATIVE {
        return Err(TypeConstantError::TransferViolated(format!(
            "Haar norm {haar_norm} exceeds the normalized block norm {scaled_block_norm}"
        )));
    }
    if y_mass > report.mass_factor * x_mass * (1.0 + RELATIVE) {
        return Err(TypeConstantError::TransferViolated(format!(
            "coefficient mass {y_mass} exceeds {} times {x_mass}",
            report.mass_factor
        )));
    }
    if !x.is_zero() && ratio_blocks < report.ratio_factor * ratio_grid - RELATIVE {
        return Err(TypeConstantError::TransferViolated(format!(
            "transferred ratio {ratio_blocks} below {} times {ratio_grid}",
            report.ratio_factor
        )));
    }
    Ok(report)
}
