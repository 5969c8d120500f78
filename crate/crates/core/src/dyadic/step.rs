//! Piecewise-constant functions and measurable sets on the grid of `2^N`
//! equal dyadic cells of `[0,1)`.
//!
//! Binary operations first refine both operands to the finer of the two
//! resolutions, so nothing is ever resampled.

use super::{DyadicError, DyadicInterval, DyadicRational};

/// Finest grid a step function or cell set may use (`2^26` cells).
pub const MAX_RESOLUTION: u32 = 26;

fn check_resolution(resolution: u32) -> Result<(), DyadicError> {
    if resolution > MAX_RESOLUTION {
        Err(DyadicError::ResolutionTooFine {
            resolution,
            max: MAX_RESOLUTION,
        })
    } else {
        Ok(())
    }
}

/// Exact step function: one dyadic rational per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFunction {
    resolution: u32,
    values: Vec<DyadicRational>,
}

impl StepFunction {
    pub fn new(resolution: u32, values: Vec<DyadicRational>) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        if values.len() != 1usize << resolution {
            return Err(DyadicError::CellCount {
                expected: 1usize << resolution,
                found: values.len(),
            });
        }
        Ok(StepFunction { resolution, values })
    }

    pub fn zero(resolution: u32) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        Ok(StepFunction {
            resolution,
            values: vec![DyadicRational::ZERO; 1usize << resolution],
        })
    }

    /// Indicator function of a cell set.
    pub fn indicator(set: &CellSet) -> Self {
        let values = set
            .cells
            .iter()
            .map(|&b| {
                if b {
                    DyadicRational::ONE
                } else {
                    DyadicRational::ZERO
                }
            })
            .collect();
        StepFunction {
            resolution: set.resolution,
            values,
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn values(&self) -> &[DyadicRational] {
        &self.values
    }

    pub fn value_at(&self, cell: usize) -> DyadicRational {
        self.values[cell]
    }

    /// The same function on the finer grid of `2^resolution` cells.
    pub fn refine(&self, resolution: u32) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        if resolution < self.resolution {
            return Err(DyadicError::CoarserResolution {
                from: self.resolution,
                to: resolution,
            });
        }
        let repeat = 1usize << (resolution - self.resolution);
        let values = self
            .values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, repeat))
            .collect();
        Ok(StepFunction { resolution, values })
    }

    /// `∫_0^1 f = 2^-N Σ values`, exact.
    pub fn integral(&self) -> DyadicRational {
        let sum: DyadicRational = self.values.iter().sum();
        sum.scale_pow2(-(self.resolution as i32))
    }

    /// `(∫ |f|^p)^{1/p}` in floating point from the exact cell values.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let cell = 2f64.powi(-(self.resolution as i32));
        let sum: f64 = self.values.iter().map(|v| v.to_f64().abs().powf(p)).sum();
        (sum * cell).powf(1.0 / p)
    }

    pub fn scale(&self, factor: DyadicRational) -> Self {
        StepFunction {
            resolution: self.resolution,
            values: self.values.iter().map(|v| *v * factor).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &StepFunction,
        op: impl Fn(DyadicRational, DyadicRational) -> DyadicRational,
    ) -> Result<Self, DyadicError> {
        let resolution = self.resolution.max(other.resolution);
        let a = self.refine(resolution)?;
        let b = other.refine(resolution)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| op(*x, *y))
            .collect();
        Ok(StepFunction { resolution, values })
    }

    pub fn add(&self, other: &StepFunction) -> Result<Self, DyadicError> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &StepFunction) -> Result<Self, DyadicError> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn mul(&self, other: &StepFunction) -> Result<Self, DyadicError> {
        self.zip_with(other, |x, y| x * y)
    }

    /// `{t : f(t) = value}`.
    pub fn level_set(&self, value: DyadicRational) -> CellSet {
        CellSet {
            resolution: self.resolution,
            cells: self.values.iter().map(|v| *v == value).collect(),
        }
    }

    /// `{t : f(t) ≠ 0}`.
    pub fn support(&self) -> CellSet {
        CellSet {
            resolution: self.resolution,
            cells: self.values.iter().map(|v| !v.is_zero()).collect(),
        }
    }
}

/// The `L^∞`-normalised Haar function of `interval`: `+1` on the left half,
/// `-1` on the right half, `0` elsewhere.
pub fn haar(interval: &DyadicInterval, resolution: u32) -> Result<StepFunction, DyadicError> {
    if resolution < interval.level() + 1 {
        return Err(DyadicError::ResolutionTooCoarse {
            level: interval.level(),
            resolution,
        });
    }
    let mut f = StepFunction::zero(resolution)?;
    let cells = interval.cells(resolution);
    let mid = cells.start + cells.len() / 2;
    for c in cells.start..mid {
        f.values[c] = DyadicRational::ONE;
    }
    for c in mid..cells.end {
        f.values[c] = -DyadicRational::ONE;
    }
    Ok(f)
}

/// A union of grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    resolution: u32,
    cells: Vec<bool>,
}

impl CellSet {
    pub fn empty(resolution: u32) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        Ok(CellSet {
            resolution,
            cells: vec![false; 1usize << resolution],
        })
    }

    pub fn full(resolution: u32) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        Ok(CellSet {
            resolution,
            cells: vec![true; 1usize << resolution],
        })
    }

    pub fn from_interval(interval: &DyadicInterval, resolution: u32) -> Result<Self, DyadicError> {
        if resolution < interval.level() {
            return Err(DyadicError::ResolutionTooCoarse {
                level: interval.level(),
                resolution,
            });
        }
        let mut set = CellSet::empty(resolution)?;
        for c in interval.cells(resolution) {
            set.cells[c] = true;
        }
        Ok(set)
    }

    pub fn from_intervals<'a>(
        intervals: impl IntoIterator<Item = &'a DyadicInterval>,
        resolution: u32,
    ) -> Result<Self, DyadicError> {
        let mut set = CellSet::empty(resolution)?;
        for interval in intervals {
            if resolution < interval.level() {
                return Err(DyadicError::ResolutionTooCoarse {
                    level: interval.level(),
                    resolution,
                });
            }
            for c in interval.cells(resolution) {
                set.cells[c] = true;
            }
        }
        Ok(set)
    }

    /// Builds a set from half-open cell runs `[start, end)`.
    pub fn from_runs(resolution: u32, runs: &[(usize, usize)]) -> Result<Self, DyadicError> {
        let mut set = CellSet::empty(resolution)?;
        for &(start, end) in runs {
            if start > end || end > set.cells.len() {
                return Err(DyadicError::CellCount {
                    expected: set.cells.len(),
                    found: end,
                });
            }
            set.cells[start..end].iter_mut().for_each(|c| *c = true);
        }
        Ok(set)
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.cells[cell] = true;
    }

    pub fn remove(&mut self, cell: usize) {
        self.cells[cell] = false;
    }

    /// Toggles one cell; returns the new membership.
    pub fn flip(&mut self, cell: usize) -> bool {
        self.cells[cell] = !self.cells[cell];
        self.cells[cell]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// `count · 2^-N`, exact.
    pub fn measure(&self) -> DyadicRational {
        DyadicRational::from_integer(self.count() as i128).scale_pow2(-(self.resolution as i32))
    }

    /// Membership flags, one per cell.
    pub fn flags(&self) -> &[bool] {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn refine(&self, resolution: u32) -> Result<Self, DyadicError> {
        check_resolution(resolution)?;
        if resolution < self.resolution {
            return Err(DyadicError::CoarserResolution {
                from: self.resolution,
                to: resolution,
            });
        }
        let repeat = 1usize << (resolution - self.resolution);
        let cells = self
            .cells
            .iter()
            .flat_map(|b| std::iter::repeat_n(*b, repeat))
            .collect();
        Ok(CellSet { resolution, cells })
    }

    fn zip_with(
        &self,
        other: &CellSet,
        op: impl Fn(bool, bool) -> bool,
    ) -> Result<Self, DyadicError> {
        let resolution = self.resolution.max(other.resolution);
        let a = self.refine(resolution)?;
        let b = other.refine(resolution)?;
        let cells = a
            .cells
            .iter()
            .zip(&b.cells)
            .map(|(x, y)| op(*x, *y))
            .collect();
        Ok(CellSet { resolution, cells })
    }

    pub fn union(&self, other: &CellSet) -> Result<Self, DyadicError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<Self, DyadicError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<Self, DyadicError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &CellSet) -> Result<bool, DyadicError> {
        Ok(self.difference(other)?.is_empty())
    }

    pub fn is_disjoint_from(&self, other: &CellSet) -> Result<bool, DyadicError> {
        Ok(self.intersection(other)?.is_empty())
    }

    /// Maximal runs of member cells as half-open `[start, end)` pairs.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &b) in self.cells.iter().enumerate() {
            match (b, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.cells.len()));
        }
        runs
    }
}
