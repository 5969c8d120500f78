use std::collections::HashMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::{violated, GamlenGaudetError, GamlenGaudetSystem, Property};
use crate::dyadic::{CellSet, DyadicInterval, DyadicRational, IntervalCollection};

/// Items checked, with the number of exact comparisons made for each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<(String, usize)>,
}

impl PropertyReport {
    pub fn to_json(&self) -> Value {
        self.checks
            .iter()
            .map(|(item, n)| json!({ "item": item, "comparisons": n, "passed": true }))
            .collect()
    }
}

fn subset(a: &CellSet, b: &CellSet) -> bool {
    a.flags().iter().zip(b.flags()).all(|(x, y)| !x || *y)
}

fn disjoint(a: &CellSet, b: &CellSet) -> bool {
    a.flags().iter().zip(b.flags()).all(|(x, y)| !(x & y))
}

fn count_in(set: &CellSet, signs: &[i8], sign: i8) -> usize {
    set.iter().filter(|&c| signs[c] == sign).count()
}

fn sign_set(signs: &[i8], sign: i8, resolution: u32) -> CellSet {
    let mut set = CellSet::empty(resolution).expect("system resolution is valid");
    for (c, s) in signs.iter().enumerate() {
        if *s == sign {
            set.insert(c);
        }
    }
    set
}

/// Re-checks every item of the block-system contract from the stored data.
/// All comparisons are exact.
pub fn verify_properties(system: &GamlenGaudetSystem) -> Result<PropertyReport, GamlenGaudetError> {
    let res = system.resolution;
    let root = system.root;
    let mut checks = Vec::new();

    // (i) membership and (ii) disjointness; the collection itself is checked
    // by callers holding it, here every block must sit inside K_0.
    let mut n = 0;
    for (index, list) in &system.blocks {
        for k in list {
            n += 1;
            if !k.is_subset_of(&root) {
                return Err(violated(
                    Property::Membership,
                    format!("block {k} of {index} lies outside {root}"),
                ));
            }
        }
    }
    checks.push((Property::Membership.to_string(), n));

    let mut n = 0;
    for (index, list) in &system.blocks {
        n += list.len();
        let as_set: IntervalCollection = list.iter().copied().collect();
        if as_set.len() != list.len() || !as_set.is_pairwise_disjoint() {
            return Err(violated(
                Property::Disjointness,
                format!("blocks of {index} overlap"),
            ));
        }
    }
    checks.push((Property::Disjointness.to_string(), n));

    // (iii) set relations mirror the index relations.
    let indices = system.indices();
    let mut n = 0;
    for a in &indices {
        for b in &indices {
            if a == b {
                continue;
            }
            n += 1;
            let (sa, sb) = (&system.block_sets[a], &system.block_sets[b]);
            if disjoint(sa, sb) != a.is_disjoint_from(b) {
                return Err(violated(
                    Property::Nesting,
                    format!("B({a}) and B({b}) disagree on disjointness"),
                ));
            }
            if subset(sa, sb) != a.is_subset_of(b) {
                return Err(violated(
                    Property::Nesting,
                    format!("B({a}) and B({b}) disagree on inclusion"),
                ));
            }
        }
    }
    checks.push((Property::Nesting.to_string(), n));

    // (iv) children on the right sign sets.
    let signs: HashMap<DyadicInterval, Vec<i8>> = indices
        .iter()
        .map(|i| (*i, system.signs(i).expect("index of the system")))
        .collect();
    let mut n = 0;
    for index in indices.iter().filter(|i| i.level() < system.depth) {
        let s = &signs[index];
        for (child, sign) in [(index.left_half(), 1i8), (index.right_half(), -1i8)] {
            n += 1;
            let target = sign_set(s, sign, res);
            if !subset(&system.block_sets[&child], &target) {
                return Err(violated(
                    Property::Signs,
                    format!("B({child}) leaves the set where k({index}) = {sign:+}"),
                ));
            }
        }
    }
    checks.push((Property::Signs.to_string(), n));

    // (v) measure bounds per level, and the sharper leaf bound.
    let k0 = root.measure();
    let slack = system.epsilon().scale_pow2(1) * k0;
    let one_minus = DyadicRational::ONE - system.delta;
    let mut n = 0;
    for index in &indices {
        let share = k0.scale_pow2(-(index.level() as i32));
        let measure = system.block_sets[index].measure();
        n += 1;
        if measure > share || measure < share - slack {
            return Err(violated(
                Property::Measure,
                format!(
                    "|B({index})| = {measure} outside [{}, {share}]",
                    share - slack
                ),
            ));
        }
        if index.level() == system.depth && measure < one_minus * share {
            return Err(violated(
                Property::Measure,
                format!("leaf |B({index})| = {measure} below {}", one_minus * share),
            ));
        }
    }
    checks.push((Property::Measure.to_string(), n));

    // (a) exact leaf measure, (b) symmetry on the trimmed sets.
    let target = system.leaf_target();
    let leaves: Vec<DyadicInterval> = system.leaves().collect();
    for leaf in &leaves {
        let a = &system.trimmed_sets[leaf];
        if a.measure() != target {
            return Err(violated(
                Property::TrimmedMeasure,
                format!("|A({leaf})| = {} != {target}", a.measure()),
            ));
        }
        if !subset(a, &system.block_sets[leaf]) {
            return Err(violated(
                Property::TrimmedMeasure,
                format!("A({leaf}) leaves B({leaf})"),
            ));
        }
    }
    checks.push((Property::TrimmedMeasure.to_string(), leaves.len()));
    for leaf in &leaves {
        let a = &system.trimmed_sets[leaf];
        let (plus, minus) = (count_in(a, &signs[leaf], 1), count_in(a, &signs[leaf], -1));
        if plus != minus {
            return Err(violated(
                Property::Symmetry,
                format!("k({leaf}) on A({leaf}) has {plus} cells at +1 and {minus} at -1"),
            ));
        }
    }
    checks.push((Property::Symmetry.to_string(), leaves.len()));

    // S: union of the leaf sets, right measure, and the induced A_I above the leaves.
    let mut union = CellSet::empty(res)?;
    for leaf in &leaves {
        union = union.union(&system.trimmed_sets[leaf])?;
    }
    if union != system.support {
        return Err(violated(
            Property::Support,
            "S differs from the union of the leaf trimmed sets",
        ));
    }
    if system.support.measure() != one_minus * k0 {
        return Err(violated(
            Property::Support,
            format!("|S| = {} != {}", system.support.measure(), one_minus * k0),
        ));
    }
    for index in indices.iter().filter(|i| i.level() < system.depth) {
        if system.trimmed_sets[index] != system.block_sets[index].intersection(&system.support)? {
            return Err(violated(
                Property::Support,
                format!("A({index}) differs from B({index}) ∩ S"),
            ));
        }
    }
    checks.push((Property::Support.to_string(), indices.len()));

    Ok(PropertyReport { checks })
}

/// Measure received by one sign pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomMeasure {
    /// For Haar atoms the signs along the chain `[0,1) ⊃ … ⊃ leaf`, e.g. `+-+`;
    /// for foreign patterns the non-zero entries as `level:index=±`.
    pub pattern: String,
    pub measure: DyadicRational,
}

/// Pushforward of `dt/|S|` on `S` under `t ↦ (k_I(t))_I`, compared atom by
/// atom with the Haar pushforward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointDistributionReport {
    /// Measure every Haar atom must receive inside `S`: `2^{-n-1}|S|`.
    pub expected: DyadicRational,
    pub atoms: Vec<AtomMeasure>,
    /// Patterns that occur on `S` but not in the Haar system.
    pub foreign: Vec<AtomMeasure>,
}

impl JointDistributionReport {
    pub fn passed(&self) -> bool {
        self.foreign.is_empty() && self.atoms.iter().all(|a| a.measure == self.expected)
    }

    /// First mismatch as an error.
    pub fn ensure(&self) -> Result<(), GamlenGaudetError> {
        if let Some(a) = self.atoms.iter().find(|a| a.measure != self.expected) {
            return Err(GamlenGaudetError::JointDistribution {
                atom: a.pattern.clone(),
                expected: self.expected,
                found: a.measure,
            });
        }
        if let Some(a) = self.foreign.first() {
            return Err(GamlenGaudetError::JointDistribution {
                atom: a.pattern.clone(),
                expected: DyadicRational::ZERO,
                found: a.measure,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "passed": self.passed(),
            "expected": self.expected,
            "atoms": self.atoms,
            "foreign": self.foreign,
        })
    }
}

type Pattern = Vec<(u32, i8)>;

/// Position of an index interval inside `D_n` listed in `(level, index)` order.
fn position(i: &DyadicInterval) -> u32 {
    ((1u64 << i.level()) - 1 + i.index()) as u32
}

fn sign_char(s: i8) -> char {
    if s > 0 {
        '+'
    } else {
        '-'
    }
}

/// Enumerates the `2^{n+1}` Haar atoms and checks that each receives exactly
/// `2^{-n-1}|S|` of `S` under the block sums, and that nothing else occurs.
pub fn verify_joint_distribution(system: &GamlenGaudetSystem) -> JointDistributionReport {
    let res = system.resolution;
    let depth = system.depth;
    let indices = system.indices();

    let mut patterns: Vec<Pattern> = vec![Vec::new(); 1usize << res];
    for index in &indices {
        let signs = system.signs(index).expect("index of the system");
        let pos = position(index);
        for c in system.support.iter() {
            if signs[c] != 0 {
                patterns[c].push((pos, signs[c]));
            }
        }
    }
    let mut counts: HashMap<Pattern, usize> = HashMap::new();
    for c in system.support.iter() {
        *counts.entry(std::mem::take(&mut patterns[c])).or_default() += 1;
    }

    let cell = |count: usize| DyadicRational::from_integer(count as i128).scale_pow2(-(res as i32));
    let mut atoms = Vec::with_capacity(1usize << (depth + 1));
    for s in 0u64..(1u64 << (depth + 1)) {
        let mut pattern = Pattern::new();
        let mut label = String::new();
        for k in 0..=depth {
            let index = DyadicInterval::new(k, s >> (depth + 1 - k)).expect("index in range");
            let sign = if (s >> (depth - k)) & 1 == 0 { 1 } else { -1 };
            pattern.push((position(&index), sign));
            label.push(sign_char(sign));
        }
        let count = counts.remove(&pattern).unwrap_or(0);
        atoms.push(AtomMeasure {
            pattern: label,
            measure: cell(count),
        });
    }

    let mut foreign: Vec<(Pattern, usize)> = counts.into_iter().collect();
    foreign.sort();
    let foreign = foreign
        .into_iter()
        .map(|(pattern, count)| {
            let label = if pattern.is_empty() {
                "0".to_string()
            } else {
                pattern
                    .iter()
                    .map(|(pos, s)| format!("{}={}", indices[*pos as usize], sign_char(*s)))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            AtomMeasure {
                pattern: label,
                measure: cell(count),
            }
        })
        .collect();

    JointDistributionReport {
        expected: system.support.measure().scale_pow2(-(depth as i32) - 1),
        atoms,
        foreign,
    }
}
