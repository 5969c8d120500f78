use super::*;
use crate::dyadic::full_grid;
use proptest::prelude::*;

fn iv(level: u32, index: u64) -> DyadicInterval {
    DyadicInterval::new(level, index).unwrap()
}

fn q(s: &str) -> DyadicRational {
    s.parse().unwrap()
}

fn chain(depth: u32) -> IntervalCollection {
    (0..=depth).map(|j| iv(j, 0)).collect()
}

/// O(|E|^2) double loop straight from the definition.
fn brute_force_carleson(e: &IntervalCollection) -> DyadicRational {
    e.iter()
        .map(|i| {
            let mass: DyadicRational = e
                .iter()
                .filter(|j| j.is_subset_of(i))
                .map(|j| j.measure())
                .sum();
            mass.scale_pow2(i.level() as i32)
        })
        .max()
        .unwrap()
}

fn brute_force_generations(e: &IntervalCollection) -> Vec<IntervalCollection> {
    let mut rest = e.clone();
    let mut out = Vec::new();
    while !rest.is_empty() {
        let maximal: IntervalCollection = rest
            .iter()
            .filter(|j| !rest.iter().any(|i| i != *j && j.is_subset_of(i)))
            .copied()
            .collect();
        rest = rest.difference(&maximal);
        out.push(maximal);
    }
    out
}

#[test]
fn local_mass_examples() {
    let e = full_grid(2);
    assert_eq!(local_mass(&e, &iv(0, 0)), q("3"));
    assert_eq!(local_mass(&e, &iv(1, 0)), q("1"));
    assert_eq!(local_mass(&full_grid(0), &iv(0, 0)), q("1"));
    let report = carleson_constant(&e).unwrap();
    for (i, m) in &report.local_masses {
        assert_eq!(*m, local_mass(&e, i));
    }
}

#[test]
fn full_grid_constant_matches_oracle() {
    for n in 0..=10u32 {
        let e = full_grid(n);
        let report = carleson_constant(&e).unwrap();
        assert_eq!(report.constant, DyadicRational::from_integer(n as i128 + 1));
        assert_eq!(report.witness, DyadicInterval::unit());
        if n <= 6 {
            assert_eq!(brute_force_carleson(&e), report.constant);
        }
    }
}

#[test]
fn disjoint_family_has_constant_one() {
    let e: IntervalCollection = [iv(1, 0), iv(3, 6), iv(3, 7), iv(4, 9)]
        .into_iter()
        .collect();
    assert_eq!(carleson_constant(&e).unwrap().constant, DyadicRational::ONE);
}

#[test]
fn chain_constant_is_geometric_sum() {
    for n in 1..=12u32 {
        let report = carleson_constant(&chain(n)).unwrap();
        assert_eq!(report.constant, q("2") - DyadicRational::pow2(-(n as i32)));
        assert_eq!(report.witness, DyadicInterval::unit());
        assert_eq!(report.constant, brute_force_carleson(&chain(n)));
    }
}

#[test]
fn empty_inputs_rejected() {
    let empty = IntervalCollection::new();
    assert_eq!(
        carleson_constant(&empty),
        Err(CarlesonError::EmptyCollection)
    );
    assert_eq!(generations(&empty), Err(CarlesonError::EmptyCollection));
    assert!(almost_disjoint_decomposition(&empty).is_err());
    assert!(condensation_search(&empty, 1).is_err());
    assert_eq!(
        local_generations(&iv(1, 1), &[iv(1, 0)].into_iter().collect()),
        Err(CarlesonError::EmptyRestriction(iv(1, 1)))
    );
}

#[test]
fn generation_examples() {
    let g = generations(&full_grid(2)).unwrap();
    assert_eq!(g.len(), 3);
    for k in 0..3u32 {
        assert!(g.generations[k as usize].iter().all(|i| i.level() == k));
        assert_eq!(g.generations[k as usize].len(), 1 << k);
    }
    let disjoint: IntervalCollection = (0..4).map(|k| iv(2, k)).collect();
    assert_eq!(
        generations(&disjoint).unwrap().generations,
        vec![disjoint.clone()]
    );
    let nested: IntervalCollection = [iv(0, 0), iv(2, 0)].into_iter().collect();
    let g = generations(&nested).unwrap();
    assert_eq!(
        g.generations,
        vec![
            [iv(0, 0)].into_iter().collect(),
            [iv(2, 0)].into_iter().collect()
        ]
    );
}

#[test]
fn local_generation_examples() {
    let e = full_grid(2);
    assert_eq!(
        local_generations(&iv(0, 0), &e).unwrap(),
        generations(&e).unwrap()
    );
    let g = local_generations(&iv(1, 0), &e).unwrap();
    assert_eq!(g.generation(0), [iv(1, 0)].into_iter().collect());
    assert_eq!(g.generation(1), [iv(2, 0), iv(2, 1)].into_iter().collect());
}

#[test]
fn choose_m_examples() {
    assert_eq!(choose_m(q("1")).unwrap(), 4);
    assert_eq!(choose_m(q("3")).unwrap(), 12);
    assert_eq!(choose_m(q("9/8")).unwrap(), 5);
    assert_eq!(choose_m(q("2") - q("1/2^10")).unwrap(), 8);
    assert!(choose_m(q("1/2")).is_err());
}

#[test]
fn decomposition_of_disjoint_family() {
    let e: IntervalCollection = (0..8).map(|k| iv(3, k)).collect();
    let cover = almost_disjoint_decomposition(&e).unwrap();
    assert_eq!(cover.m, 4);
    assert_eq!(cover.parts[0], e);
    assert!(cover.parts[1..].iter().all(|p| p.is_empty()));
}

#[test]
fn decomposition_of_full_grid_is_one_generation_per_part() {
    let e = full_grid(8);
    let cover = almost_disjoint_decomposition(&e).unwrap();
    assert_eq!(cover.carleson, q("9"));
    assert_eq!(cover.m, 36);
    for (i, part) in cover.parts.iter().enumerate() {
        if i <= 8 {
            assert!(part.iter().all(|j| j.level() == i as u32));
            assert_eq!(part.len(), 1 << i);
        } else {
            assert!(part.is_empty());
        }
    }
}

#[test]
fn decomposition_of_chain() {
    let e = chain(10);
    let cover = almost_disjoint_decomposition(&e).unwrap();
    assert_eq!(cover.m, 8);
    for (i, part) in cover.parts.iter().enumerate() {
        let expected: IntervalCollection = (0..=10u32)
            .filter(|j| j % 8 == i as u32)
            .map(|j| iv(j, 0))
            .collect();
        assert_eq!(part, &expected);
    }
    let root_cert = cover.certificates[0]
        .iter()
        .find(|c| c.interval == DyadicInterval::unit())
        .unwrap();
    assert_eq!(root_cert.child_mass, q("1/2^8"));

    let chains = chain_structure(&cover.parts[0]).unwrap();
    let entry = chains
        .decay
        .iter()
        .find(|d| d.interval == DyadicInterval::unit() && d.l == 1)
        .unwrap();
    assert_eq!(entry.mass, q("1/2^8"));
    assert!(entry.mass <= q("1/2"));
}

#[test]
fn certificate_json_shape() {
    let cover = almost_disjoint_decomposition(&chain(3)).unwrap();
    let v = cover.to_json();
    assert_eq!(v["carleson"], "15/2^3");
    assert_eq!(v["M"], 8);
    assert_eq!(v["parts"].as_array().unwrap().len(), 8);
    assert!(v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn chain_structure_examples() {
    let disjoint: IntervalCollection = [iv(1, 0), iv(2, 2), iv(2, 3)].into_iter().collect();
    let s = chain_structure(&disjoint).unwrap();
    for k in &disjoint {
        assert_eq!(s.chain_length(k), Some(0));
        assert_eq!(s.fringes[k].pieces, vec![*k]);
    }

    let pair: IntervalCollection = [iv(0, 0), iv(2, 0)].into_iter().collect();
    let s = chain_structure(&pair).unwrap();
    let fringe = &s.fringes[&iv(0, 0)];
    assert_eq!(fringe.measure(), q("3/4"));
    // [1/4, 1) as maximal dyadic pieces: [1/4,1/2) and [1/2,1).
    assert_eq!(fringe.pieces, vec![iv(1, 1), iv(2, 1)]);
    assert_eq!(s.chains[&iv(2, 0)], vec![iv(2, 0), iv(0, 0)]);
}

#[test]
fn chain_structure_rejects_dense_part() {
    assert!(matches!(
        chain_structure(&full_grid(2)),
        Err(CarlesonError::NotAlmostDisjoint(_))
    ));
}

#[test]
fn condensation_examples() {
    for n in 1..=4 {
        let w = condensation_search(&full_grid(4), n).unwrap();
        assert_eq!(w.root, DyadicInterval::unit());
        assert_eq!(w.density, DyadicRational::ONE);
    }
    let disjoint: IntervalCollection = (0..4).map(|k| iv(2, k)).collect();
    assert_eq!(
        condensation_search(&disjoint, 1).unwrap().density,
        DyadicRational::ZERO
    );

    let mut holed = full_grid(4);
    holed.remove(&iv(4, 0));
    let d = condensation_densities(&holed, 4).unwrap();
    assert_eq!(d[&DyadicInterval::unit()], q("15/16"));
    assert_eq!(
        condensation_search(&holed, 0),
        Err(CarlesonError::InvalidDepth)
    );
}

#[test]
fn lemma1_bound_examples() {
    let b = lemma1_upper_bound(q("1"), 2.0).unwrap();
    assert!((b - 6.828427124746192).abs() < 1e-12);
    let b = lemma1_upper_bound(q("3"), 1.5).unwrap();
    assert!((b - 6.186984469106856).abs() < 1e-12);
    // M = 4 → 16 doubles twice; at p = 2 each doubling of M gains √2.
    let ratio =
        lemma1_upper_bound(q("4"), 2.0).unwrap() / lemma1_upper_bound(q("7/4"), 2.0).unwrap();
    assert_eq!(choose_m(q("4")).unwrap(), 16);
    assert_eq!(choose_m(q("7/4")).unwrap(), 7);
    assert!((ratio - (16.0f64 / 7.0).sqrt()).abs() < 1e-12);
    let r =
        lemma1_upper_bound(q("15/4"), 2.0).unwrap() / lemma1_upper_bound(q("7/4"), 2.0).unwrap();
    assert_eq!(choose_m(q("15/4")).unwrap(), 15);
    assert!((r - (15.0f64 / 7.0).sqrt()).abs() < 1e-12);
    assert!(matches!(
        lemma1_upper_bound(q("1"), 1.0),
        Err(CarlesonError::InvalidExponent(_))
    ));
}

fn arb_collection(max_level: u32, max_len: usize) -> impl Strategy<Value = IntervalCollection> {
    proptest::collection::vec((0..=max_level, any::<u64>()), 1..max_len).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(l, k)| DyadicInterval::new(l, k % (1u64 << l)).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn constant_matches_brute_force(e in arb_collection(7, 60)) {
        let report = carleson_constant(&e).unwrap();
        prop_assert_eq!(report.constant, brute_force_carleson(&e));
        prop_assert!(report.constant >= DyadicRational::ONE);
        prop_assert_eq!(report.constant, report.local_masses[&report.witness].scale_pow2(report.witness.level() as i32));
    }

    #[test]
    fn monotone_under_inclusion(e in arb_collection(7, 40), extra in arb_collection(7, 40)) {
        let bigger = e.union(&extra);
        prop_assert!(carleson_constant(&e).unwrap().constant <= carleson_constant(&bigger).unwrap().constant);
    }

    #[test]
    fn scaling_covariance(e in arb_collection(8, 60)) {
        for frame in e.iter().take(5) {
            let local = e.restrict_to(frame);
            let rescaled = e.rescaled_to(frame);
            prop_assert_eq!(carleson_constant(&local).unwrap().constant, carleson_constant(&rescaled).unwrap().constant);
        }
    }

    #[test]
    fn generations_match_peeling(e in arb_collection(6, 40)) {
        let g = generations(&e).unwrap();
        prop_assert_eq!(&g.generations, &brute_force_generations(&e));
        let union = g.generations.iter().fold(IntervalCollection::new(), |acc, x| acc.union(x));
        prop_assert_eq!(union, e.clone());
        prop_assert_eq!(g.generations.iter().map(|x| x.len()).sum::<usize>(), e.len());
    }

    #[test]
    fn decomposition_certificates_hold(e in arb_collection(9, 120)) {
        let cover = almost_disjoint_decomposition(&e).unwrap();
        prop_assert_eq!(cover.parts.len() as u64, cover.m);
        let union = cover.parts.iter().fold(IntervalCollection::new(), |acc, x| acc.union(x));
        prop_assert_eq!(union, e.clone());
        prop_assert_eq!(cover.parts.iter().map(|x| x.len()).sum::<usize>(), e.len());
        for part in &cover.parts {
            let s = chain_structure(part).unwrap();
            for k in part {
                let root = *s.chains[k].last().unwrap();
                prop_assert!(!part.iter().any(|i| i != &root && root.is_subset_of(i)));
            }
            // Fringe sets are disjoint: their total measure equals the measure of their union.
            if let Some(max) = part.max_level() {
                let mut union = CellSet::empty(max).unwrap();
                let mut total = DyadicRational::ZERO;
                for f in s.fringes.values() {
                    total += f.measure();
                    union = union.union(&f.to_cell_set(max).unwrap()).unwrap();
                }
                prop_assert_eq!(union.measure(), total);
            }
        }
    }

    #[test]
    fn condensation_density_is_disjoint_union_measure(e in arb_collection(7, 80), n in 1usize..4) {
        let densities = condensation_densities(&e, n).unwrap();
        for (root, density) in densities.iter().take(6) {
            let local = local_generations(root, &e).unwrap().generation(n);
            let max = e.max_level().unwrap();
            let set = CellSet::from_intervals(&local.to_vec(), max).unwrap();
            prop_assert_eq!(set.measure(), local.total_measure());
            prop_assert_eq!(*density, local.total_measure().scale_pow2(root.level() as i32));
            prop_assert!(*density <= DyadicRational::ONE);
        }
    }
}
