//! Block systems `(B_I)_{I∈D_n}` carved out of a collection whose generations
//! condense inside a root `K_0`: the block sums `k_I = Σ_{K∈B_I} h_K`,
//! restricted to a trimmed support `S`, have exactly the joint distribution of
//! the Haar functions `(h_I)_{I∈D_n}`.
//!
//! Blocks are built recursively: the root block is `{K_0}`, and the children
//! of `I` receive the maximal members of `E` inside the left (resp. right)
//! halves of the blocks of `I`. Level `k` then covers exactly the `k`-th
//! generation of `E` inside `K_0`, which gives the upper measure bound for
//! free and the lower one from the condensation hypothesis.

mod transfer;
mod verify;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::carleson::{condensation_densities, CarlesonError, Forest};
use crate::dyadic::{
    full_grid, CellSet, DyadicError, DyadicInterval, DyadicRational, Half, IntervalCollection,
    StepFunction,
};

pub use transfer::{transfer_coefficients, verify_transfer_inequality, TransferInequalityReport};
pub use verify::{
    verify_joint_distribution, verify_properties, AtomMeasure, JointDistributionReport,
    PropertyReport,
};

/// Finest grid a system is built on. Blocks and trimmed sets are stored as
/// one flag per cell for each of the `2^{n+1} - 1` indices.
pub const MAX_SYSTEM_RESOLUTION: u32 = 20;

/// The items of the block-system contract, named as they are usually listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    /// Blocks are members of `E` inside `K_0`.
    Membership,
    /// The intervals of each block are pairwise disjoint.
    Disjointness,
    /// Block sets nest and separate like the index intervals.
    Nesting,
    /// Child blocks sit on the matching sign set of the parent sum.
    Signs,
    /// Measure bounds per level.
    Measure,
    /// Leaf trimmed sets have the exact target measure.
    TrimmedMeasure,
    /// Leaf sums are symmetric on the trimmed sets.
    Symmetry,
    /// The support is the union of leaf trimmed sets and has measure `(1-δ)|K_0|`.
    Support,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Property::Membership => "i",
            Property::Disjointness => "ii",
            Property::Nesting => "iii",
            Property::Signs => "iv",
            Property::Measure => "v",
            Property::TrimmedMeasure => "a",
            Property::Symmetry => "b",
            Property::Support => "S",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GamlenGaudetError {
    #[error("root {0} is not a member of the collection")]
    RootNotInCollection(DyadicInterval),
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("delta = {0} must lie strictly between 0 and 1")]
    InvalidDelta(DyadicRational),
    #[error("generation {depth} fills {density} of {root}, below the required {required}")]
    InsufficientCondensation {
        root: DyadicInterval,
        depth: u32,
        density: DyadicRational,
        required: DyadicRational,
    },
    #[error("delta = {delta} cannot be realised on a grid of at most 2^{max} cells")]
    InfeasibleDelta { delta: DyadicRational, max: u32 },
    #[error("the blocks need resolution {needed}, above the limit {max}")]
    ResolutionTooFine { needed: u32, max: u32 },
    #[error("property ({item}) violated: {detail}")]
    PropertyViolated { item: Property, detail: String },
    #[error(
        "joint distribution mismatch at atom {atom}: expected measure {expected}, found {found}"
    )]
    JointDistribution {
        atom: String,
        expected: DyadicRational,
        found: DyadicRational,
    },
    #[error(transparent)]
    Carleson(#[from] CarlesonError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

pub(crate) fn violated(item: Property, detail: impl Into<String>) -> GamlenGaudetError {
    GamlenGaudetError::PropertyViolated {
        item,
        detail: detail.into(),
    }
}

/// A built and verified block system.
#[derive(Debug, Clone, PartialEq)]
pub struct GamlenGaudetSystem {
    root: DyadicInterval,
    depth: u32,
    delta: DyadicRational,
    requested_delta: DyadicRational,
    resolution: u32,
    blocks: BTreeMap<DyadicInterval, Vec<DyadicInterval>>,
    block_sets: BTreeMap<DyadicInterval, CellSet>,
    trimmed_sets: BTreeMap<DyadicInterval, CellSet>,
    support: CellSet,
}

impl GamlenGaudetSystem {
    pub fn root(&self) -> DyadicInterval {
        self.root
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// The `δ` the system was built with; larger than the requested one only
    /// when the requested value needed a grid finer than [`MAX_SYSTEM_RESOLUTION`].
    pub fn delta(&self) -> DyadicRational {
        self.delta
    }

    pub fn requested_delta(&self) -> DyadicRational {
        self.requested_delta
    }

    /// `ε = 2^{-n-1} δ`.
    pub fn epsilon(&self) -> DyadicRational {
        self.delta.scale_pow2(-(self.depth as i32) - 1)
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// The index intervals `D_n`, in `(level, index)` order.
    pub fn indices(&self) -> Vec<DyadicInterval> {
        self.blocks.keys().copied().collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = DyadicInterval> + '_ {
        self.blocks
            .keys()
            .copied()
            .filter(move |i| i.level() == self.depth)
    }

    pub fn blocks(&self, index: &DyadicInterval) -> Option<&[DyadicInterval]> {
        self.blocks.get(index).map(|b| b.as_slice())
    }

    pub fn block_set(&self, index: &DyadicInterval) -> Option<&CellSet> {
        self.block_sets.get(index)
    }

    /// `A_I`: the trimmed set for a leaf, `B_I ∩ S` above the leaves.
    pub fn trimmed_set(&self, index: &DyadicInterval) -> Option<&CellSet> {
        self.trimmed_sets.get(index)
    }

    pub fn support(&self) -> &CellSet {
        &self.support
    }

    /// `(1-δ) 2^{-n} |K_0|`, the measure of every leaf trimmed set.
    pub fn leaf_target(&self) -> DyadicRational {
        ((DyadicRational::ONE - self.delta) * self.root.measure()).scale_pow2(-(self.depth as i32))
    }

    /// Cell values of `k_I = Σ_{K∈B_I} h_K` as signs.
    pub fn signs(&self, index: &DyadicInterval) -> Option<Vec<i8>> {
        let blocks = self.blocks.get(index)?;
        let mut out = vec![0i8; 1usize << self.resolution];
        for k in blocks {
            let cells = k.cells(self.resolution);
            let mid = cells.start + cells.len() / 2;
            out[cells.start..mid].iter_mut().for_each(|v| *v = 1);
            out[mid..cells.end].iter_mut().for_each(|v| *v = -1);
        }
        Some(out)
    }

    /// `k_I` as an exact step function at the system resolution.
    pub fn function(&self, index: &DyadicInterval) -> Option<StepFunction> {
        let values = self
            .signs(index)?
            .into_iter()
            .map(|s| DyadicRational::from_integer(s as i128))
            .collect();
        Some(StepFunction::new(self.resolution, values).expect("length matches resolution"))
    }

    /// The same blocks with a different support; every `A_I` becomes `B_I ∩ S`.
    /// Used to probe the verifiers with perturbed systems.
    pub fn with_support(&self, support: CellSet) -> Result<Self, GamlenGaudetError> {
        if support.resolution() != self.resolution {
            return Err(DyadicError::CoarserResolution {
                from: self.resolution,
                to: support.resolution(),
            }
            .into());
        }
        let mut out = self.clone();
        for (index, set) in &self.block_sets {
            out.trimmed_sets.insert(*index, set.intersection(&support)?);
        }
        out.support = support;
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let runs = |set: &CellSet| -> Value {
            set.runs().into_iter().map(|(a, b)| json!([a, b])).collect()
        };
        let indices: Vec<Value> = self
            .blocks
            .iter()
            .map(|(index, blocks)| {
                json!({
                    "index": index,
                    "blocks": blocks,
                    "block_set": runs(&self.block_sets[index]),
                    "trimmed_set": runs(&self.trimmed_sets[index]),
                })
            })
            .collect();
        json!({
            "root": self.root,
            "depth": self.depth,
            "delta": self.delta,
            "requested_delta": self.requested_delta,
            "epsilon": self.epsilon(),
            "resolution": self.resolution,
            "indices": indices,
            "support": runs(&self.support),
            "support_measure": self.support.measure(),
        })
    }
}

/// Least `N` such that `(1-δ) 2^{-n} |K_0|` is an even number of cells of size `2^-N`.
fn target_resolution(root: &DyadicInterval, depth: u32, delta: DyadicRational) -> u32 {
    (DyadicRational::ONE - delta).exponent() + depth + root.level() + 1
}

/// Builds the block system of depth `depth` rooted at `root` and verifies
/// every item of the contract before returning it.
pub fn build_system(
    collection: &IntervalCollection,
    root: DyadicInterval,
    depth: u32,
    delta: DyadicRational,
) -> Result<GamlenGaudetSystem, GamlenGaudetError> {
    if depth == 0 {
        return Err(GamlenGaudetError::InvalidDepth);
    }
    if delta <= DyadicRational::ZERO || delta >= DyadicRational::ONE {
        return Err(GamlenGaudetError::InvalidDelta(delta));
    }
    if !collection.contains(&root) {
        return Err(GamlenGaudetError::RootNotInCollection(root));
    }

    let local = collection.restrict_to(&root);
    let density = condensation_densities(&local, depth as usize)?
        .get(&root)
        .copied()
        .unwrap_or(DyadicRational::ZERO);
    let required = DyadicRational::ONE - delta.scale_pow2(-(depth as i32) - 1);
    if density < required {
        return Err(GamlenGaudetError::InsufficientCondensation {
            root,
            depth,
            density,
            required,
        });
    }

    let forest = Forest::new(&local);
    let children: HashMap<DyadicInterval, Vec<DyadicInterval>> = forest
        .nodes
        .iter()
        .zip(&forest.children)
        .map(|(node, kids)| (*node, kids.iter().map(|&c| forest.nodes[c]).collect()))
        .collect();

    let mut blocks: BTreeMap<DyadicInterval, Vec<DyadicInterval>> =
        full_grid(depth).iter().map(|i| (*i, Vec::new())).collect();
    blocks.insert(DyadicInterval::unit(), vec![root]);
    for index in full_grid(depth - 1).iter() {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for k in &blocks[index] {
            for child in children.get(k).into_iter().flatten() {
                match k.half_containing(child) {
                    Some(Half::Left) => left.push(*child),
                    Some(Half::Right) => right.push(*child),
                    None => unreachable!("forest children are strict descendants"),
                }
            }
        }
        left.sort();
        right.sort();
        blocks.insert(index.left_half(), left);
        blocks.insert(index.right_half(), right);
    }

    let block_resolution = blocks
        .values()
        .flatten()
        .map(|k| k.level() + 1)
        .max()
        .unwrap_or(1);
    if block_resolution > MAX_SYSTEM_RESOLUTION {
        return Err(GamlenGaudetError::ResolutionTooFine {
            needed: block_resolution,
            max: MAX_SYSTEM_RESOLUTION,
        });
    }
    let requested_delta = delta;
    let mut delta = delta;
    if target_resolution(&root, depth, delta) > MAX_SYSTEM_RESOLUTION {
        let floor = depth + root.level() + 1;
        if floor > MAX_SYSTEM_RESOLUTION {
            return Err(GamlenGaudetError::InfeasibleDelta {
                delta,
                max: MAX_SYSTEM_RESOLUTION,
            });
        }
        // Round δ up to the coarsest dyadic grid that still fits.
        let bits = (MAX_SYSTEM_RESOLUTION - floor) as i32;
        delta = DyadicRational::from_integer(delta.scale_pow2(bits).ceil()).scale_pow2(-bits);
        if delta >= DyadicRational::ONE {
            return Err(GamlenGaudetError::InfeasibleDelta {
                delta: requested_delta,
                max: MAX_SYSTEM_RESOLUTION,
            });
        }
    }
    let resolution = block_resolution.max(target_resolution(&root, depth, delta));

    let mut block_sets = BTreeMap::new();
    for (index, list) in &blocks {
        block_sets.insert(*index, CellSet::from_intervals(list, resolution)?);
    }

    let target = ((DyadicRational::ONE - delta) * root.measure()).scale_pow2(-(depth as i32));
    let target_cells = target
        .cells_at(resolution)
        .expect("resolution chosen to make the target integral") as usize;
    let mut trimmed_sets = BTreeMap::new();
    let mut support = CellSet::empty(resolution)?;
    for (index, list) in blocks.iter().filter(|(i, _)| i.level() == depth) {
        let mut set = block_sets[index].clone();
        let count = set.count();
        if count < target_cells {
            return Err(violated(
                Property::Measure,
                format!("leaf {index} has {count} cells, fewer than the target {target_cells}"),
            ));
        }
        // Remove mirrored cell pairs, one from each half of a block, starting
        // with the smallest blocks.
        let mut pairs = (count - target_cells) / 2;
        for k in list.iter().rev() {
            if pairs == 0 {
                break;
            }
            let cells = k.cells(resolution);
            let half = cells.len() / 2;
            let take = pairs.min(half);
            for j in 0..take {
                set.remove(cells.start + half - 1 - j);
                set.remove(cells.end - 1 - j);
            }
            pairs -= take;
        }
        for c in set.iter() {
            support.insert(c);
        }
        trimmed_sets.insert(*index, set);
    }
    for (index, set) in &block_sets {
        if index.level() < depth {
            trimmed_sets.insert(*index, set.intersection(&support)?);
        }
    }

    let system = GamlenGaudetSystem {
        root,
        depth,
        delta,
        requested_delta,
        resolution,
        blocks,
        block_sets,
        trimmed_sets,
        support,
    };
    verify_properties(&system)?;
    Ok(system)
}
