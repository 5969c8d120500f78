//! Carleson constants of finite dyadic collections and the combinatorics
//! built on them: generation stratification, the almost-disjoint
//! decomposition into `M` parts (with exact per-instance certificates), the
//! ancestor chains and fringe sets of each part, and the search for densely
//! packed roots.

mod forest;

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::dyadic::{CellSet, DyadicError, DyadicInterval, DyadicRational, IntervalCollection};
pub(crate) use forest::Forest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarlesonError {
    #[error("collection is empty")]
    EmptyCollection,
    #[error("no interval of the collection lies inside {0}")]
    EmptyRestriction(DyadicInterval),
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("exponent p = {0} must exceed 1")]
    InvalidExponent(f64),
    #[error("Carleson constant {0} must be at least 1")]
    InvalidConstant(DyadicRational),
    #[error("certificate violated in part {part}: {violation}")]
    CertificateViolation { part: usize, violation: Violation },
    #[error("part is not almost disjoint: {0}")]
    NotAlmostDisjoint(Violation),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

/// `Σ_{J∈E, J⊆I} |J|`.
pub fn local_mass(collection: &IntervalCollection, interval: &DyadicInterval) -> DyadicRational {
    collection.restrict_to(interval).total_measure()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonReport {
    /// `⟦E⟧ = sup_{I∈E} |I|^-1 Σ_{J∈E, J⊆I} |J|`, exact.
    pub constant: DyadicRational,
    /// Smallest `(level, index)` interval attaining the supremum.
    pub witness: DyadicInterval,
    pub local_masses: BTreeMap<DyadicInterval, DyadicRational>,
}

pub fn carleson_constant(collection: &IntervalCollection) -> Result<CarlesonReport, CarlesonError> {
    if collection.is_empty() {
        return Err(CarlesonError::EmptyCollection);
    }
    let forest = Forest::new(collection);
    let masses = forest.local_masses();
    let mut best: Option<(DyadicRational, DyadicInterval)> = None;
    for (node, mass) in forest.nodes.iter().zip(&masses) {
        let ratio = mass.scale_pow2(node.level() as i32);
        // Nodes arrive in (level, index) order, so strict `>` keeps the smallest witness.
        if best.is_none_or(|(b, _)| ratio > b) {
            best = Some((ratio, *node));
        }
    }
    let (constant, witness) = best.expect("non-empty");
    Ok(CarlesonReport {
        constant,
        witness,
        local_masses: forest.nodes.iter().copied().zip(masses).collect(),
    })
}

/// Layers `G_0, G_1, …` of repeatedly peeling off maximal elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationDecomposition {
    pub generations: Vec<IntervalCollection>,
}

impl GenerationDecomposition {
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    /// `G_k`, empty beyond the last generation.
    pub fn generation(&self, k: usize) -> IntervalCollection {
        self.generations.get(k).cloned().unwrap_or_default()
    }
}

/// An interval belongs to `G_k(E)` exactly when it has `k` strict ancestors in `E`.
pub fn generations(
    collection: &IntervalCollection,
) -> Result<GenerationDecomposition, CarlesonError> {
    if collection.is_empty() {
        return Err(CarlesonError::EmptyCollection);
    }
    Ok(generations_of(&Forest::new(collection)))
}

fn generations_of(forest: &Forest) -> GenerationDecomposition {
    let count = forest.depth.iter().max().map_or(0, |d| d + 1);
    let mut generations = vec![IntervalCollection::new(); count];
    for (node, &d) in forest.nodes.iter().zip(&forest.depth) {
        generations[d].insert(*node);
    }
    GenerationDecomposition { generations }
}

/// `G_k(I, E) = G_k(I ∩ E)`.
pub fn local_generations(
    interval: &DyadicInterval,
    collection: &IntervalCollection,
) -> Result<GenerationDecomposition, CarlesonError> {
    let restricted = collection.restrict_to(interval);
    if restricted.is_empty() {
        return Err(CarlesonError::EmptyRestriction(*interval));
    }
    generations(&restricted)
}

/// Largest integer strictly smaller than `4c + 1`.
pub fn choose_m(carleson: DyadicRational) -> Result<u64, CarlesonError> {
    if carleson < DyadicRational::ONE {
        return Err(CarlesonError::InvalidConstant(carleson));
    }
    let bound = carleson.scale_pow2(2) + DyadicRational::ONE;
    Ok((bound.ceil() - 1) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `Σ_{J∈G_1(I,E_i)} |J| > |I|/2`.
    ChildMass,
    /// `Σ_{K∈I∩E_i} |K| > 2|I|`.
    LocalMass,
    /// `|A_I|` outside `[|I|/2, |I|]`.
    FringeMeasure,
    /// Two fringe sets intersect.
    FringeOverlap,
    /// `Σ_{K : G_{-l}(K)=I} |K| > 2^-l |I|`.
    Decay { l: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub interval: DyadicInterval,
    pub kind: ViolationKind,
    pub lhs: DyadicRational,
    pub bound: DyadicRational,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} at {}: {} > {}",
            self.kind, self.interval, self.lhs, self.bound
        )
    }
}

/// The two almost-disjointness masses of one interval of a part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalCertificate {
    pub interval: DyadicInterval,
    /// `Σ_{J∈G_1(I,E_i)} |J|`.
    pub child_mass: DyadicRational,
    /// `Σ_{K∈I∩E_i} |K|`.
    pub local_mass: DyadicRational,
}

fn certify_forest(forest: &Forest) -> (Vec<IntervalCertificate>, Vec<Violation>) {
    let masses = forest.local_masses();
    let mut certs = Vec::with_capacity(forest.len());
    let mut violations = Vec::new();
    for (i, node) in forest.nodes.iter().enumerate() {
        let size = node.measure();
        let child_mass: DyadicRational = forest.children[i]
            .iter()
            .map(|&c| forest.nodes[c].measure())
            .sum();
        let cert = IntervalCertificate {
            interval: *node,
            child_mass,
            local_mass: masses[i],
        };
        if child_mass > size.half() {
            violations.push(Violation {
                interval: *node,
                kind: ViolationKind::ChildMass,
                lhs: child_mass,
                bound: size.half(),
            });
        }
        let twice = size.scale_pow2(1);
        if masses[i] > twice {
            violations.push(Violation {
                interval: *node,
                kind: ViolationKind::LocalMass,
                lhs: masses[i],
                bound: twice,
            });
        }
        certs.push(cert);
    }
    (certs, violations)
}

/// Checks both almost-disjointness inequalities on every interval of `part`.
pub fn certify_part(part: &IntervalCollection) -> (Vec<IntervalCertificate>, Vec<Violation>) {
    certify_forest(&Forest::new(part))
}

/// `E = E_0 ∪ … ∪ E_{M-1}` with `E_i = ∪_k G_{Mk+i}(E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostDisjointCover {
    pub carleson: DyadicRational,
    pub m: u64,
    /// Exactly `m` parts; empty parts are kept so indices match the formula.
    pub parts: Vec<IntervalCollection>,
    pub certificates: Vec<Vec<IntervalCertificate>>,
    pub violations: Vec<(usize, Violation)>,
}

impl AlmostDisjointCover {
    pub fn to_json(&self) -> Value {
        let parts: Vec<Value> = self
            .parts
            .iter()
            .zip(&self.certificates)
            .enumerate()
            .map(|(i, (part, certs))| {
                json!({
                    "index": i,
                    "intervals": part.iter().map(|j| [j.level() as u64, j.index()]).collect::<Vec<_>>(),
                    "certificates": certs.iter().map(|c| json!({
                        "interval": [c.interval.level() as u64, c.interval.index()],
                        "child_mass": c.child_mass,
                        "local_mass": c.local_mass,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let violations: Vec<Value> = self
            .violations
            .iter()
            .map(|(part, v)| {
                json!({
                    "part": part,
                    "interval": [v.interval.level() as u64, v.interval.index()],
                    "kind": format!("{:?}", v.kind),
                    "lhs": v.lhs,
                    "bound": v.bound,
                })
            })
            .collect();
        json!({ "carleson": self.carleson, "M": self.m, "parts": parts, "violations": violations })
    }
}

/// Builds the cover and certifies every part. Returns an error naming the
/// first violated inequality; a violation signals a bug, not a bad input.
pub fn almost_disjoint_decomposition(
    collection: &IntervalCollection,
) -> Result<AlmostDisjointCover, CarlesonError> {
    let cover = almost_disjoint_cover_unchecked(collection)?;
    if let Some((part, violation)) = cover.violations.first() {
        return Err(CarlesonError::CertificateViolation {
            part: *part,
            violation: *violation,
        });
    }
    Ok(cover)
}

/// Same as [`almost_disjoint_decomposition`] but reports violations in the
/// returned cover instead of failing.
pub fn almost_disjoint_cover_unchecked(
    collection: &IntervalCollection,
) -> Result<AlmostDisjointCover, CarlesonError> {
    let report = carleson_constant(collection)?;
    let m = choose_m(report.constant)?;
    let forest = Forest::new(collection);
    let mut parts = vec![IntervalCollection::new(); m as usize];
    for (node, &d) in forest.nodes.iter().zip(&forest.depth) {
        parts[d % m as usize].insert(*node);
    }
    let mut certificates = Vec::with_capacity(parts.len());
    let mut violations = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let (certs, bad) = certify_part(part);
        certificates.push(certs);
        violations.extend(bad.into_iter().map(|v| (i, v)));
    }
    Ok(AlmostDisjointCover {
        carleson: report.constant,
        m,
        parts,
        certificates,
        violations,
    })
}

/// `A_I = I \ ∪_{J∈G_1(I,E_i)} J`, stored as maximal dyadic pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FringeSet {
    pub pieces: Vec<DyadicInterval>,
}

impl FringeSet {
    pub fn measure(&self) -> DyadicRational {
        self.pieces.iter().map(|p| p.measure()).sum()
    }

    pub fn to_cell_set(&self, resolution: u32) -> Result<CellSet, DyadicError> {
        CellSet::from_intervals(&self.pieces, resolution)
    }
}

fn fringe_pieces(
    top: DyadicInterval,
    children: &[DyadicInterval],
    max_level: u32,
) -> Vec<DyadicInterval> {
    // Children are disjoint; sorted by their first cell at `max_level`, the
    // ones inside any dyadic I form a contiguous run.
    let start = |i: &DyadicInterval| i.index() << (max_level - i.level());
    let mut sorted = children.to_vec();
    sorted.sort_by_key(start);
    let starts: Vec<u64> = sorted.iter().map(start).collect();
    let mut pieces = Vec::new();
    let mut stack = vec![top];
    while let Some(i) = stack.pop() {
        let lo = start(&i);
        let hi = lo + (1u64 << (max_level - i.level()));
        let a = starts.partition_point(|&s| s < lo);
        let b = starts.partition_point(|&s| s < hi);
        match b - a {
            0 => pieces.push(i),
            1 if sorted[a] == i => {}
            _ => {
                stack.push(i.right_half());
                stack.push(i.left_half());
            }
        }
    }
    pieces.sort();
    pieces
}

/// `Σ_{K∈E_i : G_{-l}(K)=I} |K|`, recorded when positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecayEntry {
    pub interval: DyadicInterval,
    pub l: usize,
    pub mass: DyadicRational,
}

/// Ancestor chains and fringe sets of one almost-disjoint part.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStructure {
    /// `K = G_0(K) ⊂ G_{-1}(K) ⊂ … ⊂ G_{-n(K)}(K)`, listed from `K` upwards.
    pub chains: BTreeMap<DyadicInterval, Vec<DyadicInterval>>,
    pub fringes: BTreeMap<DyadicInterval, FringeSet>,
    pub decay: Vec<DecayEntry>,
}

impl ChainStructure {
    /// `n(K)`.
    pub fn chain_length(&self, k: &DyadicInterval) -> Option<usize> {
        self.chains.get(k).map(|c| c.len() - 1)
    }
}

/// Builds chains and fringe sets of an almost-disjoint part and verifies,
/// exactly: `|I|/2 ≤ |A_I| ≤ |I|`, pairwise disjointness of the fringe sets,
/// and the geometric decay `Σ_{K : G_{-l}(K)=I} |K| ≤ 2^-l |I|`.
pub fn chain_structure(part: &IntervalCollection) -> Result<ChainStructure, CarlesonError> {
    let forest = Forest::new(part);
    let (_, bad) = certify_forest(&forest);
    if let Some(v) = bad.first() {
        return Err(CarlesonError::NotAlmostDisjoint(*v));
    }
    let Some(max_level) = part.max_level() else {
        return Ok(ChainStructure {
            chains: BTreeMap::new(),
            fringes: BTreeMap::new(),
            decay: Vec::new(),
        });
    };
    let violation = |interval, kind, lhs, bound| CarlesonError::CertificateViolation {
        part: 0,
        violation: Violation {
            interval,
            kind,
            lhs,
            bound,
        },
    };

    let mut chains = BTreeMap::new();
    let mut fringes = BTreeMap::new();
    let mut decay_mass: BTreeMap<(usize, usize), DyadicRational> = BTreeMap::new();
    for (i, node) in forest.nodes.iter().enumerate() {
        let chain = forest.chain(i);
        for (l, &a) in chain.iter().enumerate() {
            *decay_mass.entry((a, l)).or_default() += node.measure();
        }
        chains.insert(
            *node,
            chain.iter().map(|&c| forest.nodes[c]).collect::<Vec<_>>(),
        );

        let children: Vec<DyadicInterval> = forest.children[i]
            .iter()
            .map(|&c| forest.nodes[c])
            .collect();
        let fringe = FringeSet {
            pieces: fringe_pieces(*node, &children, max_level),
        };
        let measure = fringe.measure();
        let size = node.measure();
        if measure < size.half() {
            return Err(violation(
                *node,
                ViolationKind::FringeMeasure,
                size.half(),
                measure,
            ));
        }
        if measure > size {
            return Err(violation(
                *node,
                ViolationKind::FringeMeasure,
                measure,
                size,
            ));
        }
        fringes.insert(*node, fringe);
    }

    let mut runs: Vec<(u64, u64, DyadicInterval)> = fringes
        .iter()
        .flat_map(|(owner, f)| {
            f.pieces.iter().map(move |p| {
                let lo = p.index() << (max_level - p.level());
                (lo, lo + (1u64 << (max_level - p.level())), *owner)
            })
        })
        .collect();
    runs.sort();
    for w in runs.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(violation(
                w[1].2,
                ViolationKind::FringeOverlap,
                DyadicRational::ONE,
                DyadicRational::ZERO,
            ));
        }
    }

    let mut decay = Vec::with_capacity(decay_mass.len());
    for ((a, l), mass) in decay_mass {
        let interval = forest.nodes[a];
        let bound = interval.measure().scale_pow2(-(l as i32));
        if mass > bound {
            return Err(violation(interval, ViolationKind::Decay { l }, mass, bound));
        }
        decay.push(DecayEntry { interval, l, mass });
    }
    Ok(ChainStructure {
        chains,
        fringes,
        decay,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondensationWitness {
    pub root: DyadicInterval,
    pub depth: usize,
    /// `Σ_{J∈G_n(K_0,E)} |J| / |K_0|`, exact, in `[0, 1]`.
    pub density: DyadicRational,
}

/// Density of `G_n(K_0, E)` inside `K_0` for every `K_0 ∈ E`.
pub fn condensation_densities(
    collection: &IntervalCollection,
    depth: usize,
) -> Result<BTreeMap<DyadicInterval, DyadicRational>, CarlesonError> {
    if collection.is_empty() {
        return Err(CarlesonError::EmptyCollection);
    }
    if depth == 0 {
        return Err(CarlesonError::InvalidDepth);
    }
    let forest = Forest::new(collection);
    let mut mass = vec![DyadicRational::ZERO; forest.len()];
    for (i, node) in forest.nodes.iter().enumerate() {
        if let Some(root) = forest.ancestor(i, depth) {
            mass[root] += node.measure();
        }
    }
    Ok(forest
        .nodes
        .iter()
        .zip(mass)
        .map(|(node, m)| (*node, m.scale_pow2(node.level() as i32)))
        .collect())
}

/// The root of `E` whose `n`-th local generation fills the largest fraction
/// of it; ties go to the smallest `(level, index)`.
pub fn condensation_search(
    collection: &IntervalCollection,
    depth: usize,
) -> Result<CondensationWitness, CarlesonError> {
    let densities = condensation_densities(collection, depth)?;
    let mut best: Option<(DyadicInterval, DyadicRational)> = None;
    for (root, density) in densities {
        if best.is_none_or(|(_, d)| density > d) {
            best = Some((root, density));
        }
    }
    let (root, density) = best.expect("non-empty");
    Ok(CondensationWitness {
        root,
        depth,
        density,
    })
}

/// `(1 - 2^{-1/p})^{-1} · M^{1-1/p}` with `M = choose_m(carleson)`: the
/// explicit constant of the upper estimate over a collection with the given
/// Carleson constant.
pub fn lemma1_upper_bound(carleson: DyadicRational, p: f64) -> Result<f64, CarlesonError> {
    if !p.is_finite() || p <= 1.0 {
        return Err(CarlesonError::InvalidExponent(p));
    }
    let m = choose_m(carleson)? as f64;
    let geometric = 1.0 / (1.0 - 2f64.powf(-1.0 / p));
    Ok(geometric * m.powf(1.0 - 1.0 / p))
}

#[cfg(test)]
mod tests;
