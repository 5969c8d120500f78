use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DyadicError, DyadicRational};

/// Deepest level an interval may live on. Keeps `index << shift` inside `u64`
/// and measures inside the `i128` numerators of [`DyadicRational`].
pub const MAX_LEVEL: u32 = 62;

/// The dyadic interval `[index·2^-level, (index+1)·2^-level)` in `[0,1)`.
///
/// Indices are 0-based: the interval written `[(k-1)/2^m, k/2^m)` with
/// `1 <= k <= 2^m` in 1-based notation has `index = k - 1` here.
///
/// The derived order is by `(level, index)`; every deterministic tie-break in
/// the crate ("smallest interval first") refers to this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    level: u32,
    index: u64,
}

/// How two dyadic intervals sit relative to each other. Partial overlap is
/// impossible for dyadic intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    /// The first interval is strictly contained in the second.
    Inside,
    /// The first interval strictly contains the second.
    Contains,
    Disjoint,
}

impl DyadicInterval {
    pub fn new(level: u32, index: u64) -> Result<Self, DyadicError> {
        if level > MAX_LEVEL {
            return Err(DyadicError::LevelTooDeep {
                level,
                max: MAX_LEVEL,
            });
        }
        if index >= 1u64 << level {
            return Err(DyadicError::IndexOutOfRange { level, index });
        }
        Ok(DyadicInterval { level, index })
    }

    /// `[0, 1)`.
    pub const fn unit() -> Self {
        DyadicInterval { level: 0, index: 0 }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// `|I| = 2^-level`.
    pub fn measure(&self) -> DyadicRational {
        DyadicRational::pow2(-(self.level as i32))
    }

    pub fn start(&self) -> DyadicRational {
        DyadicRational::new(self.index as i128, self.level)
    }

    pub fn end(&self) -> DyadicRational {
        DyadicRational::new(self.index as i128 + 1, self.level)
    }

    pub fn left_half(&self) -> Self {
        assert!(
            self.level < MAX_LEVEL,
            "cannot split an interval at the maximal level"
        );
        DyadicInterval {
            level: self.level + 1,
            index: 2 * self.index,
        }
    }

    pub fn right_half(&self) -> Self {
        assert!(
            self.level < MAX_LEVEL,
            "cannot split an interval at the maximal level"
        );
        DyadicInterval {
            level: self.level + 1,
            index: 2 * self.index + 1,
        }
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicInterval {
            level: self.level - 1,
            index: self.index / 2,
        })
    }

    /// The unique dyadic interval of `level` containing `self`; requires `level <= self.level()`.
    pub fn ancestor_at(&self, level: u32) -> Self {
        assert!(level <= self.level);
        DyadicInterval {
            level,
            index: self.index >> (self.level - level),
        }
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self) -> impl Iterator<Item = DyadicInterval> + '_ {
        (0..self.level).rev().map(move |l| self.ancestor_at(l))
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &DyadicInterval) -> bool {
        self.level >= other.level && self.ancestor_at(other.level) == *other
    }

    pub fn is_disjoint_from(&self, other: &DyadicInterval) -> bool {
        !self.is_subset_of(other) && !other.is_subset_of(self)
    }

    pub fn relation(&self, other: &DyadicInterval) -> Relation {
        if self == other {
            Relation::Equal
        } else if self.is_subset_of(other) {
            Relation::Inside
        } else if other.is_subset_of(self) {
            Relation::Contains
        } else {
            Relation::Disjoint
        }
    }

    /// Which half of `self` contains `inner`; `None` unless `inner ⊊ self`.
    pub fn half_containing(&self, inner: &DyadicInterval) -> Option<Half> {
        if inner.level <= self.level || !inner.is_subset_of(self) {
            return None;
        }
        let child = inner.ancestor_at(self.level + 1);
        Some(if child.index.is_multiple_of(2) {
            Half::Left
        } else {
            Half::Right
        })
    }

    /// Cells `[first, end)` covered by the interval on the grid of `2^resolution` cells.
    pub fn cells(&self, resolution: u32) -> Range<usize> {
        assert!(
            resolution >= self.level,
            "resolution {resolution} coarser than level {}",
            self.level
        );
        let shift = resolution - self.level;
        let first = (self.index << shift) as usize;
        first..first + (1usize << shift)
    }

    /// Re-expresses `self ⊆ frame` as an interval of `[0,1)` by the affine map
    /// sending `frame` onto `[0,1)`.
    pub fn relative_to(&self, frame: &DyadicInterval) -> Option<DyadicInterval> {
        if !self.is_subset_of(frame) {
            return None;
        }
        let depth = self.level - frame.level;
        Some(DyadicInterval {
            level: depth,
            index: self.index - (frame.index << depth),
        })
    }

    /// Inverse of [`relative_to`](Self::relative_to).
    pub fn embed_into(&self, frame: &DyadicInterval) -> Result<DyadicInterval, DyadicError> {
        DyadicInterval::new(
            self.level + frame.level,
            (frame.index << self.level) + self.index,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Left,
    Right,
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            write!(f, "[0,1)")
        } else {
            write!(
                f,
                "[{}/{}, {}/{})",
                self.index,
                1u64 << self.level,
                self.index + 1,
                1u64 << self.level
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(level: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(level, index).unwrap()
    }

    #[test]
    fn rejects_out_of_range_index() {
        assert!(DyadicInterval::new(2, 4).is_err());
        assert!(DyadicInterval::new(0, 1).is_err());
        assert!(DyadicInterval::new(MAX_LEVEL + 1, 0).is_err());
    }

    #[test]
    fn relations() {
        assert_eq!(iv(1, 0).relation(&iv(0, 0)), Relation::Inside);
        assert_eq!(iv(1, 0).relation(&iv(1, 1)), Relation::Disjoint);
        assert_eq!(iv(2, 1).relation(&iv(1, 0)), Relation::Inside);
        assert_eq!(iv(0, 0).relation(&iv(3, 5)), Relation::Contains);
        assert_eq!(iv(3, 5).relation(&iv(3, 5)), Relation::Equal);
    }

    #[test]
    fn endpoints_and_measure() {
        let i = iv(2, 1);
        assert_eq!(i.start(), "1/4".parse().unwrap());
        assert_eq!(i.end(), "1/2".parse().unwrap());
        assert_eq!(i.measure(), "1/4".parse().unwrap());
        assert_eq!(i.cells(4), 4..8);
    }

    #[test]
    fn half_lookup() {
        let root = iv(0, 0);
        assert_eq!(root.half_containing(&iv(3, 2)), Some(Half::Left));
        assert_eq!(root.half_containing(&iv(2, 3)), Some(Half::Right));
        assert_eq!(root.half_containing(&root), None);
        assert_eq!(iv(1, 0).half_containing(&iv(2, 3)), None);
    }

    fn arb_interval() -> impl Strategy<Value = DyadicInterval> {
        (0u32..20)
            .prop_flat_map(|l| (Just(l), 0u64..(1u64 << l)))
            .prop_map(|(l, k)| iv(l, k))
    }

    proptest! {
        #[test]
        fn halves_partition(i in arb_interval()) {
            let (l, r) = (i.left_half(), i.right_half());
            prop_assert_eq!(l.measure(), r.measure());
            prop_assert_eq!(l.measure() + r.measure(), i.measure());
            prop_assert_eq!(l.start(), i.start());
            prop_assert_eq!(l.end(), r.start());
            prop_assert_eq!(r.end(), i.end());
            prop_assert_eq!(l.relation(&r), Relation::Disjoint);
        }

        #[test]
        fn same_level_distinct_are_disjoint(i in arb_interval(), j in arb_interval()) {
            if i.level() == j.level() && i != j {
                prop_assert_eq!(i.relation(&j), Relation::Disjoint);
            }
        }

        #[test]
        fn relation_matches_endpoint_arithmetic(i in arb_interval(), j in arb_interval()) {
            let inside = j.start() <= i.start() && i.end() <= j.end();
            let overlap = i.start() < j.end() && j.start() < i.end();
            let expected = match (i == j, inside, overlap) {
                (true, _, _) => Relation::Equal,
                (false, true, _) => Relation::Inside,
                (false, false, true) => Relation::Contains,
                (false, false, false) => Relation::Disjoint,
            };
            prop_assert_eq!(i.relation(&j), expected);
        }

        #[test]
        fn relative_embedding_round_trip(i in arb_interval(), j in arb_interval()) {
            if let Some(rel) = j.relative_to(&i) {
                prop_assert_eq!(rel.embed_into(&i).unwrap(), j);
                prop_assert_eq!(rel.measure() * i.measure(), j.measure());
            }
        }
    }
}
