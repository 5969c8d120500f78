use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::HarnessError;
use crate::carleson::carleson_constant;
use crate::dyadic::{full_grid, DyadicInterval, DyadicRational, IntervalCollection};

/// Deepest level a random generator may produce.
pub const MAX_GENERATED_LEVEL: u32 = 24;

/// Recipe for a collection. The text form is `kind:arg:arg…`, for example
/// `full:3`, `disjoint:3:8`, `chain:10`, `random-budget:10:5/2:7` or
/// `cascade:2:5:0.02:11`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// Every interval of measure at least `2^-n`.
    Full { n: u32 },
    /// The first `count` intervals of one level.
    Disjoint { level: u32, count: u64 },
    /// `[0, 2^-j)` for `0 ≤ j ≤ depth`.
    Chain { depth: u32 },
    /// Greedy random insertion that never lets the Carleson constant exceed `budget`.
    RandomBudget {
        max_depth: u32,
        budget: DyadicRational,
        seed: u64,
    },
    /// `depth` generations below `[0,1)`: each member is cut into a random
    /// dyadic partition of relative depth at most `branching`, and each piece
    /// survives with probability `1 - eta`.
    Cascade {
        branching: u32,
        depth: u32,
        eta: f64,
        seed: u64,
    },
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Full { n } => write!(f, "full:{n}"),
            GeneratorSpec::Disjoint { level, count } => write!(f, "disjoint:{level}:{count}"),
            GeneratorSpec::Chain { depth } => write!(f, "chain:{depth}"),
            GeneratorSpec::RandomBudget {
                max_depth,
                budget,
                seed,
            } => {
                write!(f, "random-budget:{max_depth}:{budget}:{seed}")
            }
            GeneratorSpec::Cascade {
                branching,
                depth,
                eta,
                seed,
            } => {
                write!(f, "cascade:{branching}:{depth}:{eta}:{seed}")
            }
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| HarnessError::InvalidSpec(format!("`{s}`: {why}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |i: usize| -> Result<u64, HarnessError> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing argument"))?
                .parse::<u64>()
                .map_err(|_| bad("expected an integer"))
        };
        let small = |i: usize| -> Result<u32, HarnessError> {
            u32::try_from(int(i)?).map_err(|_| bad("argument too large"))
        };
        let arity = |n: usize| {
            if parts.len() == n {
                Ok(())
            } else {
                Err(bad("wrong number of arguments"))
            }
        };
        match parts[0] {
            "full" => {
                arity(2)?;
                Ok(GeneratorSpec::Full { n: small(1)? })
            }
            "disjoint" => {
                arity(3)?;
                Ok(GeneratorSpec::Disjoint {
                    level: small(1)?,
                    count: int(2)?,
                })
            }
            "chain" => {
                arity(2)?;
                Ok(GeneratorSpec::Chain { depth: small(1)? })
            }
            "random-budget" => {
                // The budget may itself contain `/`, never `:`.
                arity(4)?;
                let budget = parts[2]
                    .parse::<DyadicRational>()
                    .map_err(|_| bad("budget must be dyadic"))?;
                Ok(GeneratorSpec::RandomBudget {
                    max_depth: small(1)?,
                    budget,
                    seed: int(3)?,
                })
            }
            "cascade" => {
                arity(5)?;
                let eta = parts[3]
                    .parse::<f64>()
                    .map_err(|_| bad("eta must be a number"))?;
                Ok(GeneratorSpec::Cascade {
                    branching: small(1)?,
                    depth: small(2)?,
                    eta,
                    seed: int(4)?,
                })
            }
            _ => Err(bad("unknown generator")),
        }
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Builds the collection a spec describes; deterministic in the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<IntervalCollection, HarnessError> {
    match *spec {
        GeneratorSpec::Full { n } => {
            if n > MAX_GENERATED_LEVEL {
                return Err(HarnessError::InvalidSpec(format!(
                    "{spec}: level above {MAX_GENERATED_LEVEL}"
                )));
            }
            Ok(full_grid(n))
        }
        GeneratorSpec::Disjoint { level, count } => {
            if level > MAX_GENERATED_LEVEL || count > 1u64 << level {
                return Err(HarnessError::InvalidSpec(format!(
                    "{spec}: level {level} has only 2^{level} intervals"
                )));
            }
            (0..count)
                .map(|k| DyadicInterval::new(level, k).map_err(HarnessError::from))
                .collect()
        }
        GeneratorSpec::Chain { depth } => {
            if depth > MAX_GENERATED_LEVEL {
                return Err(HarnessError::InvalidSpec(format!(
                    "{spec}: level above {MAX_GENERATED_LEVEL}"
                )));
            }
            (0..=depth)
                .map(|j| DyadicInterval::new(j, 0).map_err(HarnessError::from))
                .collect()
        }
        GeneratorSpec::RandomBudget {
            max_depth,
            budget,
            seed,
        } => random_budget(max_depth, budget, seed),
        GeneratorSpec::Cascade {
            branching,
            depth,
            eta,
            seed,
        } => cascade(branching, depth, eta, seed),
    }
}

fn random_budget(
    max_depth: u32,
    budget: DyadicRational,
    seed: u64,
) -> Result<IntervalCollection, HarnessError> {
    if max_depth > MAX_GENERATED_LEVEL {
        return Err(HarnessError::InvalidSpec(format!(
            "max depth {max_depth} above {MAX_GENERATED_LEVEL}"
        )));
    }
    if budget < DyadicRational::ONE {
        return Err(HarnessError::InvalidSpec(format!(
            "budget {budget} below 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collection = IntervalCollection::new();
    // Local mass of every member, kept current under insertion.
    let mut mass: BTreeMap<DyadicInterval, DyadicRational> = BTreeMap::new();
    let attempts = 32 * (max_depth as usize + 1);
    for _ in 0..attempts {
        let level = rng.gen_range(0..=max_depth);
        let index = rng.gen_range(0..1u64 << level);
        let candidate = DyadicInterval::new(level, index)?;
        if collection.contains(&candidate) {
            continue;
        }
        let size = candidate.measure();
        let own = size + collection.restrict_to(&candidate).total_measure();
        if own > budget * size {
            continue;
        }
        let ancestors: Vec<DyadicInterval> = candidate
            .ancestors()
            .filter(|a| mass.contains_key(a))
            .collect();
        if ancestors
            .iter()
            .any(|a| mass[a] + size > budget * a.measure())
        {
            continue;
        }
        for a in &ancestors {
            *mass.get_mut(a).expect("member") += size;
        }
        mass.insert(candidate, own);
        collection.insert(candidate);
    }
    let constant = carleson_constant(&collection)?.constant;
    if constant > budget {
        return Err(HarnessError::Generator(format!(
            "random-budget produced Carleson constant {constant} above {budget}"
        )));
    }
    Ok(collection)
}

fn cascade(
    branching: u32,
    depth: u32,
    eta: f64,
    seed: u64,
) -> Result<IntervalCollection, HarnessError> {
    if branching == 0 || !(0.0..1.0).contains(&eta) {
        return Err(HarnessError::InvalidSpec(format!(
            "cascade needs branching ≥ 1 and eta in [0, 1), got {branching}, {eta}"
        )));
    }
    if branching.saturating_mul(depth) > MAX_GENERATED_LEVEL {
        return Err(HarnessError::InvalidSpec(format!(
            "cascade reaches level {} above {MAX_GENERATED_LEVEL}",
            branching.saturating_mul(depth)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = DyadicInterval::unit();
    let mut collection: IntervalCollection = std::iter::once(root).collect();
    let mut generation = vec![root];
    for _ in 0..depth {
        let mut next = Vec::new();
        for parent in &generation {
            // Random partition: always split once, then keep splitting each
            // piece with probability 1/2 until `branching` levels below.
            let mut stack = vec![(parent.left_half(), 1), (parent.right_half(), 1)];
            let mut pieces = Vec::new();
            while let Some((piece, d)) = stack.pop() {
                if d < branching && rng.gen_bool(0.5) {
                    stack.push((piece.right_half(), d + 1));
                    stack.push((piece.left_half(), d + 1));
                } else {
                    pieces.push(piece);
                }
            }
            for piece in pieces {
                if !rng.gen_bool(eta) {
                    next.push(piece);
                }
            }
        }
        next.sort();
        for piece in &next {
            collection.insert(*piece);
        }
        generation = next;
    }
    Ok(collection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{format_intervals, parse_intervals};
    use proptest::prelude::*;

    #[test]
    fn fixed_generators() {
        assert_eq!(generate(&"full:3".parse().unwrap()).unwrap().len(), 15);
        let disjoint = generate(&"disjoint:3:8".parse().unwrap()).unwrap();
        assert_eq!(disjoint.len(), 8);
        assert_eq!(
            carleson_constant(&disjoint).unwrap().constant,
            DyadicRational::ONE
        );
        let chain = generate(&"chain:10".parse().unwrap()).unwrap();
        assert_eq!(
            carleson_constant(&chain).unwrap().constant,
            DyadicRational::from_integer(2) - DyadicRational::pow2(-10)
        );
        assert!(generate(&"disjoint:3:9".parse().unwrap()).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        for s in [
            "full:3",
            "disjoint:3:8",
            "chain:10",
            "random-budget:10:5/2^1:7",
            "cascade:2:5:0.02:11",
        ] {
            let spec: GeneratorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<GeneratorSpec>().unwrap(), spec);
        }
        assert_eq!(
            "random-budget:8:5/2:1".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::RandomBudget {
                max_depth: 8,
                budget: "5/2".parse().unwrap(),
                seed: 1
            }
        );
        for bad in [
            "",
            "full",
            "full:x",
            "chain:1:2",
            "random-budget:8:1/3:1",
            "spiral:2",
        ] {
            assert!(bad.parse::<GeneratorSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn unit_budget_gives_disjoint_family() {
        let e = generate(&GeneratorSpec::RandomBudget {
            max_depth: 6,
            budget: DyadicRational::ONE,
            seed: 3,
        })
        .unwrap();
        assert!(!e.is_empty());
        assert!(e.is_pairwise_disjoint());
    }

    #[test]
    fn cascade_without_loss_tiles_each_generation() {
        let e = generate(&GeneratorSpec::Cascade {
            branching: 2,
            depth: 3,
            eta: 0.0,
            seed: 5,
        })
        .unwrap();
        let root = DyadicInterval::unit();
        let densities = crate::carleson::condensation_densities(&e, 3).unwrap();
        assert_eq!(densities[&root], DyadicRational::ONE);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_budget_respects_budget(depth in 0u32..=10, k in 4i128..=16, seed in any::<u64>()) {
            let budget = DyadicRational::new(k, 2);
            let e = generate(&GeneratorSpec::RandomBudget { max_depth: depth, budget, seed }).unwrap();
            prop_assert!(carleson_constant(&e).unwrap().constant <= budget);
            prop_assert!(e.max_level().unwrap() <= depth);
            let again = generate(&GeneratorSpec::RandomBudget { max_depth: depth, budget, seed }).unwrap();
            prop_assert_eq!(&again, &e);
        }

        #[test]
        fn generated_collections_round_trip_through_text(depth in 1u32..=8, seed in any::<u64>()) {
            for spec in [
                GeneratorSpec::RandomBudget { max_depth: depth, budget: DyadicRational::from_integer(3), seed },
                GeneratorSpec::Cascade { branching: 2, depth: depth.min(4), eta: 0.1, seed },
            ] {
                let e = generate(&spec).unwrap();
                let text = format_intervals(&e);
                prop_assert_eq!(parse_intervals(&text).unwrap(), e.clone());
                prop_assert_eq!(format_intervals(&parse_intervals(&text).unwrap()), text);
            }
        }
    }
}
