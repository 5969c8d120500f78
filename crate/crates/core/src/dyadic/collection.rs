use std::collections::{BTreeSet, HashMap};

use super::{DyadicError, DyadicInterval, DyadicRational};

/// A finite set of dyadic intervals, iterated in `(level, index)` order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct IntervalCollection {
    intervals: BTreeSet<DyadicInterval>,
}

impl IntervalCollection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a collection, rejecting repeated intervals.
    pub fn try_from_intervals(
        intervals: impl IntoIterator<Item = DyadicInterval>,
    ) -> Result<Self, DyadicError> {
        let mut set = BTreeSet::new();
        for i in intervals {
            if !set.insert(i) {
                return Err(DyadicError::Duplicate(i));
            }
        }
        Ok(IntervalCollection { intervals: set })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, interval: &DyadicInterval) -> bool {
        self.intervals.contains(interval)
    }

    pub fn iter(
        &self,
    ) -> impl DoubleEndedIterator<Item = &DyadicInterval> + ExactSizeIterator + '_ {
        self.intervals.iter()
    }

    pub fn to_vec(&self) -> Vec<DyadicInterval> {
        self.intervals.iter().copied().collect()
    }

    pub fn first(&self) -> Option<&DyadicInterval> {
        self.intervals.first()
    }

    /// Deepest level present; `None` for the empty collection.
    pub fn max_level(&self) -> Option<u32> {
        self.intervals.iter().map(|i| i.level()).max()
    }

    /// `Σ_{I∈E} |I|`.
    pub fn total_measure(&self) -> DyadicRational {
        self.intervals.iter().map(|i| i.measure()).sum()
    }

    pub fn insert(&mut self, interval: DyadicInterval) -> bool {
        self.intervals.insert(interval)
    }

    pub fn remove(&mut self, interval: &DyadicInterval) -> bool {
        self.intervals.remove(interval)
    }

    /// `I ∩ E = {J ∈ E : J ⊆ I}`.
    pub fn restrict_to(&self, frame: &DyadicInterval) -> IntervalCollection {
        let max = match self.max_level() {
            Some(m) => m,
            None => return IntervalCollection::new(),
        };
        let mut out = BTreeSet::new();
        for level in frame.level()..=max {
            let shift = level - frame.level();
            let lo = DyadicInterval::new(level, frame.index() << shift).expect("descendant exists");
            let hi = DyadicInterval::new(level, ((frame.index() + 1) << shift) - 1)
                .expect("descendant exists");
            out.extend(self.intervals.range(lo..=hi).copied());
        }
        IntervalCollection { intervals: out }
    }

    /// Restricts to `frame` and maps `frame` onto `[0,1)`.
    pub fn rescaled_to(&self, frame: &DyadicInterval) -> IntervalCollection {
        self.restrict_to(frame)
            .iter()
            .map(|j| {
                j.relative_to(frame)
                    .expect("restricted intervals lie in the frame")
            })
            .collect()
    }

    pub fn union(&self, other: &IntervalCollection) -> IntervalCollection {
        IntervalCollection {
            intervals: self.intervals.union(&other.intervals).copied().collect(),
        }
    }

    pub fn difference(&self, other: &IntervalCollection) -> IntervalCollection {
        IntervalCollection {
            intervals: self
                .intervals
                .difference(&other.intervals)
                .copied()
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &IntervalCollection) -> bool {
        self.intervals.is_subset(&other.intervals)
    }

    /// Position of every interval in iteration order.
    pub fn positions(&self) -> HashMap<DyadicInterval, usize> {
        self.intervals
            .iter()
            .enumerate()
            .map(|(i, j)| (*j, i))
            .collect()
    }

    /// True if no two members intersect.
    pub fn is_pairwise_disjoint(&self) -> bool {
        self.intervals
            .iter()
            .all(|j| j.ancestors().all(|a| !self.intervals.contains(&a)))
    }
}

impl FromIterator<DyadicInterval> for IntervalCollection {
    fn from_iter<T: IntoIterator<Item = DyadicInterval>>(iter: T) -> Self {
        IntervalCollection {
            intervals: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a IntervalCollection {
    type Item = &'a DyadicInterval;
    type IntoIter = std::collections::btree_set::Iter<'a, DyadicInterval>;
    fn into_iter(self) -> Self::IntoIter {
        self.intervals.iter()
    }
}

/// `D_n`: all dyadic intervals of measure at least `2^-n`.
pub fn full_grid(n: u32) -> IntervalCollection {
    (0..=n)
        .flat_map(|level| {
            (0..1u64 << level).map(move |k| DyadicInterval::new(level, k).expect("valid index"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(level: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(level, index).unwrap()
    }

    #[test]
    fn full_grid_sizes() {
        assert_eq!(full_grid(0).to_vec(), vec![DyadicInterval::unit()]);
        assert_eq!(full_grid(1).to_vec(), vec![iv(0, 0), iv(1, 0), iv(1, 1)]);
        // 2^6 - 1, by counting 2^m intervals on each level m = 0..=5.
        let by_level: usize = (0..=5).map(|m| 1usize << m).sum();
        assert_eq!(full_grid(5).len(), by_level);
        assert_eq!(by_level, 63);
    }

    #[test]
    fn restriction_matches_filter() {
        let e = full_grid(4);
        let frame = iv(2, 1);
        let direct: IntervalCollection = e
            .iter()
            .filter(|j| j.is_subset_of(&frame))
            .copied()
            .collect();
        assert_eq!(e.restrict_to(&frame), direct);
        assert_eq!(e.rescaled_to(&frame), full_grid(2));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(IntervalCollection::try_from_intervals([iv(1, 0), iv(1, 0)]).is_err());
    }

    #[test]
    fn disjointness() {
        assert!(full_grid(0).is_pairwise_disjoint());
        assert!(!full_grid(1).is_pairwise_disjoint());
        let level3: IntervalCollection = (0..8).map(|k| iv(3, k)).collect();
        assert!(level3.is_pairwise_disjoint());
    }
}
