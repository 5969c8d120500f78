use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Space, TypeConstantError};
use crate::dyadic::{CellSet, DyadicInterval, IntervalCollection, MAX_RESOLUTION};

/// Finitely supported family `(x_I)` of vectors in a space of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFamily {
    dim: usize,
    #[serde(with = "entry_list")]
    entries: BTreeMap<DyadicInterval, Vec<f64>>,
}

mod entry_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        level: u32,
        index: u64,
        value: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<DyadicInterval, Vec<f64>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = map
            .iter()
            .map(|(i, v)| Entry {
                level: i.level(),
                index: i.index(),
                value: v.clone(),
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<DyadicInterval, Vec<f64>>, D::Error> {
        let list = Vec::<Entry>::deserialize(d)?;
        list.into_iter()
            .map(|e| {
                DyadicInterval::new(e.level, e.index)
                    .map(|i| (i, e.value))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

impl CoefficientFamily {
    pub fn new(dim: usize) -> Self {
        CoefficientFamily {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sets `x_I`; zero vectors are dropped from the support.
    pub fn set(
        &mut self,
        interval: DyadicInterval,
        value: Vec<f64>,
    ) -> Result<(), TypeConstantError> {
        if value.len() != self.dim {
            return Err(TypeConstantError::DimensionMismatch {
                expected: self.dim,
                found: value.len(),
            });
        }
        if value.iter().all(|v| *v == 0.0) {
            self.entries.remove(&interval);
        } else {
            self.entries.insert(interval, value);
        }
        Ok(())
    }

    pub fn scalar(interval: DyadicInterval, value: f64) -> Self {
        let mut x = CoefficientFamily::new(1);
        x.set(interval, vec![value]).expect("dimension 1");
        x
    }

    pub fn get(&self, interval: &DyadicInterval) -> Option<&[f64]> {
        self.entries.get(interval).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DyadicInterval, &[f64])> {
        self.entries.iter().map(|(i, v)| (i, v.as_slice()))
    }

    pub fn support(&self) -> IntervalCollection {
        self.entries.keys().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ_I ‖x_I‖^p`.
    pub fn mass(&self, p: f64, space: &Space) -> f64 {
        self.entries.values().map(|v| space.norm(v).powf(p)).sum()
    }

    pub fn scaled(&self, t: f64) -> Self {
        let mut out = CoefficientFamily::new(self.dim);
        for (i, v) in &self.entries {
            out.set(*i, v.iter().map(|x| t * x).collect())
                .expect("same dimension");
        }
        out
    }

    /// Dense layout aligned with `intervals`, coordinate-minor.
    pub(crate) fn to_dense(&self, intervals: &[DyadicInterval]) -> Vec<f64> {
        let mut out = vec![0.0; intervals.len() * self.dim];
        for (k, i) in intervals.iter().enumerate() {
            if let Some(v) = self.entries.get(i) {
                out[k * self.dim..(k + 1) * self.dim].copy_from_slice(v);
            }
        }
        out
    }

    pub(crate) fn from_dense(intervals: &[DyadicInterval], dim: usize, dense: &[f64]) -> Self {
        let mut out = CoefficientFamily::new(dim);
        for (k, i) in intervals.iter().enumerate() {
            out.set(*i, dense[k * dim..(k + 1) * dim].to_vec())
                .expect("same dimension");
        }
        out
    }
}

/// Vector-valued step function on the grid of `2^resolution` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStepFunction {
    resolution: u32,
    dim: usize,
    values: Vec<f64>,
}

impl VectorStepFunction {
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cells(&self) -> usize {
        1usize << self.resolution
    }

    /// `(2^-N Σ_cells ‖v‖^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64, space: &Space) -> f64 {
        let sum: f64 = (0..self.cells())
            .map(|c| space.norm(self.cell(c)).powf(p))
            .sum();
        (sum * 2f64.powi(-(self.resolution as i32))).powf(1.0 / p)
    }

    /// `(|S|^-1 ∫_S ‖f‖^p)^{1/p}`: the norm in `L^p_X(S, dt/|S|)`.
    pub fn normalized_lp_norm_on(
        &self,
        set: &CellSet,
        p: f64,
        space: &Space,
    ) -> Result<f64, TypeConstantError> {
        if set.resolution() != self.resolution {
            return Err(TypeConstantError::ResolutionMismatch {
                expected: self.resolution,
                found: set.resolution(),
            });
        }
        let count = set.count();
        if count == 0 {
            return Ok(0.0);
        }
        let sum: f64 = set.iter().map(|c| space.norm(self.cell(c)).powf(p)).sum();
        Ok((sum / count as f64).powf(1.0 / p))
    }
}

/// The synthesis map `(x_I) ↦ Σ_I x_I h_I / |I|^{1/p}` over a fixed list of
/// intervals, together with its adjoint.
///
/// Both directions cost `O(cells · dim + |E| · dim)`: the forward map
/// accumulates each Haar function as three jumps of a difference array, the
/// adjoint reads half-interval integrals off prefix sums.
#[derive(Debug, Clone)]
pub struct SynthesisOperator {
    intervals: Vec<DyadicInterval>,
    /// `(start, mid, end)` cell indices.
    spans: Vec<(usize, usize, usize)>,
    /// `|I|^{-1/p}`.
    scales: Vec<f64>,
    resolution: u32,
    dim: usize,
}

impl SynthesisOperator {
    pub fn new(
        intervals: Vec<DyadicInterval>,
        p: f64,
        dim: usize,
        resolution: u32,
    ) -> Result<Self, TypeConstantError> {
        if resolution > MAX_RESOLUTION {
            return Err(TypeConstantError::ResolutionMismatch {
                expected: MAX_RESOLUTION,
                found: resolution,
            });
        }
        let mut spans = Vec::with_capacity(intervals.len());
        let mut scales = Vec::with_capacity(intervals.len());
        for i in &intervals {
            if i.level() + 1 > resolution {
                return Err(TypeConstantError::ResolutionMismatch {
                    expected: i.level() + 1,
                    found: resolution,
                });
            }
            let cells = i.cells(resolution);
            spans.push((cells.start, cells.start + cells.len() / 2, cells.end));
            scales.push(2f64.powf(i.level() as f64 / p));
        }
        Ok(SynthesisOperator {
            intervals,
            spans,
            scales,
            resolution,
            dim,
        })
    }

    /// Operator over a collection at its natural resolution `max level + 1`.
    pub fn for_collection(
        collection: &IntervalCollection,
        p: f64,
        dim: usize,
    ) -> Result<Self, TypeConstantError> {
        let resolution = collection
            .max_level()
            .ok_or(TypeConstantError::EmptyCollection)?
            + 1;
        SynthesisOperator::new(collection.to_vec(), p, dim, resolution)
    }

    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn cells(&self) -> usize {
        1usize << self.resolution
    }

    /// Dense coefficients (interval-major) to cell values (cell-major).
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut diff = vec![0.0; (self.cells() + 1) * d];
        for (k, &(s, m, e)) in self.spans.iter().enumerate() {
            let scale = self.scales[k];
            for j in 0..d {
                let a = coeffs[k * d + j] * scale;
                if a != 0.0 {
                    diff[s * d + j] += a;
                    diff[m * d + j] -= 2.0 * a;
                    diff[e * d + j] += a;
                }
            }
        }
        let mut out = vec![0.0; self.cells() * d];
        let mut running = vec![0.0; d];
        for c in 0..self.cells() {
            for j in 0..d {
                running[j] += diff[c * d + j];
                out[c * d + j] = running[j];
            }
        }
        out
    }

    /// `(T^*g)_I = ∫ g h_I / |I|^{1/p}` for cell-major `g`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut prefix = vec![0.0; (self.cells() + 1) * d];
        for c in 0..self.cells() {
            for j in 0..d {
                prefix[(c + 1) * d + j] = prefix[c * d + j] + g[c * d + j];
            }
        }
        let cell = 2f64.powi(-(self.resolution as i32));
        let mut out = vec![0.0; self.spans.len() * d];
        for (k, &(s, m, e)) in self.spans.iter().enumerate() {
            for j in 0..d {
                let left = prefix[m * d + j] - prefix[s * d + j];
                let right = prefix[e * d + j] - prefix[m * d + j];
                out[k * d + j] = (left - right) * cell * self.scales[k];
            }
        }
        out
    }

    pub fn synthesize(
        &self,
        x: &CoefficientFamily,
    ) -> Result<VectorStepFunction, TypeConstantError> {
        if x.dim() != self.dim {
            return Err(TypeConstantError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        let positions: std::collections::HashMap<_, _> = self
            .intervals
            .iter()
            .enumerate()
            .map(|(k, i)| (*i, k))
            .collect();
        if let Some((i, _)) = x.iter().find(|(i, _)| !positions.contains_key(i)) {
            return Err(TypeConstantError::SupportOutsideCollection(*i));
        }
        let dense = x.to_dense(&self.intervals);
        Ok(VectorStepFunction {
            resolution: self.resolution,
            dim: self.dim,
            values: self.apply(&dense),
        })
    }
}

/// `Σ_{I∈E} x_I h_I / |I|^{1/p}` on the grid of resolution `max level + 1`.
pub fn synthesize(
    collection: &IntervalCollection,
    x: &CoefficientFamily,
    p: f64,
) -> Result<VectorStepFunction, TypeConstantError> {
    SynthesisOperator::for_collection(collection, p, x.dim())?.synthesize(x)
}

/// `‖Σ x_I h_I/|I|^{1/p}‖_{L^p_X} / (Σ ‖x_I‖^p)^{1/p}`.
pub fn rayleigh_ratio(
    collection: &IntervalCollection,
    x: &CoefficientFamily,
    p: f64,
    space: &Space,
) -> Result<f64, TypeConstantError> {
    if x.dim() != space.dim() {
        return Err(TypeConstantError::DimensionMismatch {
            expected: space.dim(),
            found: x.dim(),
        });
    }
    if x.is_zero() {
        return Err(TypeConstantError::ZeroCoefficients);
    }
    let f = synthesize(collection, x, p)?;
    Ok(f.lp_norm(p, space) / x.mass(p, space).powf(1.0 / p))
}
