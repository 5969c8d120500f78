use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{rayleigh_ratio, CoefficientFamily, Space, SynthesisOperator, TypeConstantError};
use crate::carleson::{carleson_constant, choose_m, lemma1_upper_bound};
use crate::dyadic::{full_grid, DyadicInterval, DyadicRational, IntervalCollection};

/// Restart and convergence settings of the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    /// Seeded random starts, on top of the structured ones.
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the relative change of the ratio drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            restarts: 4,
            max_iter: 200,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// Certified lower bound (with its witness) and closed-form upper bound for
/// the best constant of the upper `ℓ^p` estimate over a collection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimate {
    pub lower: f64,
    pub witness: CoefficientFamily,
    pub upper: f64,
    pub p: f64,
    pub space: Space,
    pub iterations: usize,
    pub seed: u64,
    /// Which start produced the witness.
    pub start: String,
    /// Ratios along the winning run; non-decreasing up to rounding.
    pub ascent: Vec<f64>,
    pub size: usize,
    pub carleson: DyadicRational,
    pub m: u64,
}

impl ConstantEstimate {
    pub fn to_json(&self) -> Value {
        json!({
            "lower": self.lower,
            "upper": self.upper,
            "p": self.p,
            "space": self.space,
            "witness": self.witness,
            "iterations": self.iterations,
            "seed": self.seed,
            "start": self.start,
            "size": self.size,
            "carleson": self.carleson,
            "M": self.m,
        })
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<(), TypeConstantError> {
    if p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(TypeConstantError::InvalidExponent(p))
    }
}

struct Run {
    ratio: f64,
    x: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

fn coefficient_norm(x: &[f64], dim: usize, p: f64, space: &Space) -> f64 {
    x.chunks(dim)
        .map(|v| space.norm(v).powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn function_norm(f: &[f64], dim: usize, resolution: u32, p: f64, space: &Space) -> f64 {
    let sum: f64 = f.chunks(dim).map(|v| space.norm(v).powf(p)).sum();
    (sum * 2f64.powi(-(resolution as i32))).powf(1.0 / p)
}

/// Nonlinear power iteration for `sup ‖Tx‖_{L^p_X} / ‖x‖_{ℓ^p(X)}`:
/// `x ← J*(T^* J(Tx))` with `J`, `J*` the duality maps of `L^p_X` and
/// `ℓ^{p'}(X*)`. Each step cannot decrease the ratio.
fn power_iterate(
    op: &SynthesisOperator,
    space: &Space,
    p: f64,
    start: Vec<f64>,
    config: &EstimateConfig,
) -> Run {
    let dim = op.dim();
    let conj = p / (p - 1.0);
    let mut x = start;
    let norm = coefficient_norm(&x, dim, p, space);
    x.iter_mut().for_each(|v| *v /= norm);

    let mut best = Run {
        ratio: 0.0,
        x: x.clone(),
        iterations: 0,
        history: Vec::new(),
    };
    let mut phi = vec![0.0; dim];
    let mut psi = vec![0.0; dim];
    let mut previous: Option<f64> = None;
    for iteration in 0..=config.max_iter {
        let f = op.apply(&x);
        let ratio = function_norm(&f, dim, op.resolution(), p, space);
        best.history.push(ratio);
        if ratio > best.ratio {
            best.ratio = ratio;
            best.x.clone_from(&x);
            best.iterations = iteration;
        }
        if let Some(prev) = previous {
            if (ratio - prev).abs() <= config.tol * ratio.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        previous = Some(ratio);
        if ratio == 0.0 || iteration == config.max_iter {
            break;
        }

        let mut g = vec![0.0; f.len()];
        for (cell, out) in f.chunks(dim).zip(g.chunks_mut(dim)) {
            let n = space.norm(cell);
            if n > 0.0 {
                space.norming_functional(cell, &mut phi);
                let w = n.powf(p - 1.0);
                for (o, ph) in out.iter_mut().zip(&phi) {
                    *o = w * ph;
                }
            }
        }
        let z = op.adjoint(&g);
        let mut next = vec![0.0; z.len()];
        for (zi, out) in z.chunks(dim).zip(next.chunks_mut(dim)) {
            let n = space.dual_norm(zi);
            if n > 0.0 {
                space.norming_vector(zi, &mut psi);
                let w = n.powf(conj - 1.0);
                for (o, ps) in out.iter_mut().zip(&psi) {
                    *o = w * ps;
                }
            }
        }
        let norm = coefficient_norm(&next, dim, p, space);
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        next.iter_mut().for_each(|v| *v /= norm);
        x = next;
    }
    best
}

fn structured_starts(intervals: &[DyadicInterval], dim: usize) -> Vec<(String, Vec<f64>)> {
    let n = intervals.len();
    let mut singleton = vec![0.0; n * dim];
    singleton[0] = 1.0;
    let ones = vec![1.0; n * dim];
    let mut spread = vec![0.0; n * dim];
    for k in 0..n {
        spread[k * dim + k % dim] = 1.0;
    }
    vec![
        ("singleton".into(), singleton),
        ("ones".into(), ones),
        ("l1-witness".into(), spread),
    ]
}

fn random_start(len: usize, seed: u64, r: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn estimate_best_constant(
    collection: &IntervalCollection,
    p: f64,
    space: &Space,
    config: &EstimateConfig,
) -> Result<ConstantEstimate, TypeConstantError> {
    estimate_best_constant_seeded(collection, p, space, config, &[])
}

/// Like [`estimate_best_constant`], with extra caller-supplied starting
/// families (for example a witness found on a sub-collection).
pub fn estimate_best_constant_seeded(
    collection: &IntervalCollection,
    p: f64,
    space: &Space,
    config: &EstimateConfig,
    seeds: &[CoefficientFamily],
) -> Result<ConstantEstimate, TypeConstantError> {
    check_exponent(p)?;
    if collection.is_empty() {
        return Err(TypeConstantError::EmptyCollection);
    }
    let dim = space.dim();
    let op = SynthesisOperator::for_collection(collection, p, dim)?;
    let intervals = op.intervals().to_vec();

    let mut starts = structured_starts(&intervals, dim);
    for (k, s) in seeds.iter().enumerate() {
        if s.dim() != dim {
            return Err(TypeConstantError::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        if let Some((i, _)) = s.iter().find(|(i, _)| !collection.contains(i)) {
            return Err(TypeConstantError::SupportOutsideCollection(*i));
        }
        if !s.is_zero() {
            starts.push((format!("seed-{k}"), s.to_dense(&intervals)));
        }
    }
    for r in 0..config.restarts {
        starts.push((
            format!("random-{r}"),
            random_start(intervals.len() * dim, config.seed, r),
        ));
    }

    let runs: Vec<(String, Run)> = starts
        .into_par_iter()
        .map(|(label, start)| {
            let run = power_iterate(&op, space, p, start, config);
            (label, run)
        })
        .collect();
    let mut best: Option<(String, Run)> = None;
    for (label, run) in runs {
        if best.as_ref().is_none_or(|(_, b)| run.ratio > b.ratio) {
            best = Some((label, run));
        }
    }
    let (start, run) = best.expect("at least one start");
    let witness = CoefficientFamily::from_dense(&intervals, dim, &run.x);
    let lower = rayleigh_ratio(collection, &witness, p, space)?;

    let carleson = carleson_constant(collection)?.constant;
    Ok(ConstantEstimate {
        lower,
        witness,
        upper: lemma1_upper_bound(carleson, p)?,
        p,
        space: *space,
        iterations: run.iterations,
        seed: config.seed,
        start,
        ascent: run.history,
        size: collection.len(),
        carleson,
        m: choose_m(carleson)?,
    })
}

/// `x_I = e_I` on `D_n` in `ℓ^1` of dimension `2^{n+1} - 1`.
pub fn l1_witness_family(n: u32) -> CoefficientFamily {
    let grid = full_grid(n);
    let dim = grid.len();
    let mut x = CoefficientFamily::new(dim);
    for (k, i) in grid.iter().enumerate() {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        x.set(*i, v).expect("dimension matches");
    }
    x
}

/// Closed form of the Rayleigh ratio of [`l1_witness_family`]:
/// `Σ_{m=0}^n 2^{m/p} / (2^{n+1} - 1)^{1/p}`. Every point lies in exactly one
/// interval per level, so the synthesized function has constant norm.
pub fn l1_witness_ratio(n: u32, p: f64) -> f64 {
    let numerator: f64 = (0..=n).map(|m| 2f64.powf(m as f64 / p)).sum();
    let count = 2f64.powi(n as i32 + 1) - 1.0;
    numerator / count.powf(1.0 / p)
}

/// Outcome of comparing an estimate with the closed-form upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub estimate: ConstantEstimate,
    /// `upper - lower`; non-negative up to `1e-9` when the check passes.
    pub margin: f64,
}

pub const LEMMA1_TOLERANCE: f64 = 1e-9;

pub fn check_lemma1(
    collection: &IntervalCollection,
    p: f64,
    space: &Space,
    config: &EstimateConfig,
) -> Result<Lemma1Report, TypeConstantError> {
    let estimate = estimate_best_constant(collection, p, space, config)?;
    let margin = estimate.upper - estimate.lower;
    if margin < -LEMMA1_TOLERANCE {
        return Err(TypeConstantError::Lemma1Violated {
            lower: estimate.lower,
            upper: estimate.upper,
        });
    }
    Ok(Lemma1Report { estimate, margin })
}
