use proptest::prelude::*;

use super::*;
use crate::dyadic::{full_grid, haar, DyadicInterval, IntervalCollection};

fn iv(level: u32, index: u64) -> DyadicInterval {
    DyadicInterval::new(level, index).unwrap()
}

fn scalar_family(entries: &[(DyadicInterval, f64)]) -> CoefficientFamily {
    let mut x = CoefficientFamily::new(1);
    for (i, v) in entries {
        x.set(*i, vec![*v]).unwrap();
    }
    x
}

/// Cell values of `Σ x_I h_I/|I|^{1/p}` built from exact Haar step functions.
fn oracle_cells(x: &CoefficientFamily, p: f64, resolution: u32) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; x.dim()]; 1 << resolution];
    for (i, v) in x.iter() {
        let h = haar(i, resolution).unwrap();
        let scale = i.measure().to_f64().powf(-1.0 / p);
        for (c, cell) in out.iter_mut().enumerate() {
            let s = h.value_at(c).to_f64();
            for (o, a) in cell.iter_mut().zip(v) {
                *o += s * scale * a;
            }
        }
    }
    out
}

fn oracle_norm(cells: &[Vec<f64>], p: f64, space: &Space) -> f64 {
    let sum: f64 = cells.iter().map(|v| space.norm(v).powf(p)).sum();
    (sum / cells.len() as f64).powf(1.0 / p)
}

#[test]
fn single_root_coefficient() {
    let e = full_grid(0);
    let x = CoefficientFamily::scalar(iv(0, 0), 1.0);
    let f = synthesize(&e, &x, 2.0).unwrap();
    assert_eq!(f.resolution(), 1);
    assert_eq!(f.cell(0), &[1.0]);
    assert_eq!(f.cell(1), &[-1.0]);
    assert_eq!(f.lp_norm(2.0, &Space::Scalar), 1.0);
}

#[test]
fn disjoint_unit_coefficients() {
    let e: IntervalCollection = [iv(1, 0), iv(2, 2)].into_iter().collect();
    let x = scalar_family(&[(iv(1, 0), 1.0), (iv(2, 2), 1.0)]);
    for p in [1.25, 1.5, 2.0] {
        let f = synthesize(&e, &x, p).unwrap();
        assert!((f.lp_norm(p, &Space::Scalar).powf(p) - 2.0).abs() < 1e-12);
        assert!((rayleigh_ratio(&e, &x, p, &Space::Scalar).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn three_orthonormal_haar_functions() {
    let e = full_grid(1);
    let x = scalar_family(&[(iv(0, 0), 1.0), (iv(1, 0), 1.0), (iv(1, 1), 1.0)]);
    let f = synthesize(&e, &x, 2.0).unwrap();
    assert!((f.lp_norm(2.0, &Space::Scalar) - 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn l1_of_dimension_seven_on_depth_two() {
    let x = l1_witness_family(2);
    assert_eq!(x.dim(), 7);
    let ratio = rayleigh_ratio(&full_grid(2), &x, 2.0, &Space::l1(7)).unwrap();
    assert!((ratio - 1.6684159028525303).abs() < 1e-12, "{ratio}");
}

#[test]
fn l1_witness_closed_form_against_grid() {
    assert_eq!(l1_witness_ratio(0, 2.0), 1.0);
    assert!((l1_witness_ratio(5, 2.0) - 2.129136232612844).abs() < 1e-12);
    for p in [1.25, 1.5, 2.0] {
        let mut previous = 0.0;
        for n in 0..=6 {
            let x = l1_witness_family(n);
            let space = Space::l1(x.dim());
            let cells = oracle_cells(&x, p, n + 1);
            let grid = oracle_norm(&cells, p, &space) / x.mass(p, &space).powf(1.0 / p);
            let closed = l1_witness_ratio(n, p);
            assert!(
                (grid - closed).abs() < 1e-9,
                "n={n} p={p}: {grid} vs {closed}"
            );
            assert!(closed > previous);
            previous = closed;
        }
    }
}

#[test]
fn errors() {
    let e = full_grid(1);
    let outside = CoefficientFamily::scalar(iv(2, 0), 1.0);
    assert_eq!(
        synthesize(&e, &outside, 2.0),
        Err(TypeConstantError::SupportOutsideCollection(iv(2, 0)))
    );
    assert_eq!(
        rayleigh_ratio(&e, &CoefficientFamily::new(1), 2.0, &Space::Scalar),
        Err(TypeConstantError::ZeroCoefficients)
    );
    let config = EstimateConfig::default();
    for p in [1.0, 2.5, f64::NAN] {
        assert!(matches!(
            estimate_best_constant(&e, p, &Space::Scalar, &config),
            Err(TypeConstantError::InvalidExponent(_))
        ));
    }
    assert_eq!(
        estimate_best_constant(&IntervalCollection::new(), 2.0, &Space::Scalar, &config),
        Err(TypeConstantError::EmptyCollection)
    );
    let wrong_dim = CoefficientFamily::scalar(iv(0, 0), 1.0);
    assert!(matches!(
        rayleigh_ratio(&e, &wrong_dim, 2.0, &Space::l1(3)),
        Err(TypeConstantError::DimensionMismatch { .. })
    ));
}

#[test]
fn disjoint_estimate_is_one() {
    let e: IntervalCollection = (0..8).map(|k| iv(3, k)).collect();
    let config = EstimateConfig::default();
    for (p, upper) in [
        (1.25, 3.0999773547208362),
        (1.5, 4.289815435887515),
        (2.0, 6.828427124746192),
    ] {
        let est = estimate_best_constant(&e, p, &Space::Scalar, &config).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-6, "p={p}: {}", est.lower);
        assert!((est.upper - upper).abs() < 1e-12);
        assert_eq!(est.m, 4);
    }
}

#[test]
fn parseval_estimates() {
    let config = EstimateConfig::default();
    for n in 0..=5 {
        for space in [Space::Scalar, Space::sequence(3, 2.0).unwrap()] {
            let est = estimate_best_constant(&full_grid(n), 2.0, &space, &config).unwrap();
            assert!(
                (est.lower - 1.0).abs() < 1e-6,
                "n={n} {space}: {}",
                est.lower
            );
        }
    }
}

#[test]
fn l1_estimate_reaches_the_witness() {
    let est = estimate_best_constant(
        &full_grid(2),
        2.0,
        &Space::l1(7),
        &EstimateConfig::default(),
    )
    .unwrap();
    assert!(est.lower >= 1.6682 - 1e-6);
    assert!(est.lower >= 1.6684159028525303 - 1e-9);
    assert!(est.lower <= est.upper);
}

#[test]
fn estimates_are_deterministic_in_the_seed() {
    let e: IntervalCollection = [iv(0, 0), iv(1, 0), iv(3, 1), iv(3, 6), iv(2, 3)]
        .into_iter()
        .collect();
    let config = EstimateConfig {
        seed: 17,
        ..EstimateConfig::default()
    };
    let a = estimate_best_constant(&e, 1.5, &Space::Scalar, &config).unwrap();
    let b = estimate_best_constant(&e, 1.5, &Space::Scalar, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn upper_bound_on_chain() {
    let chain: IntervalCollection = (0..=10).map(|j| iv(j, 0)).collect();
    let report = check_lemma1(&chain, 2.0, &Space::Scalar, &EstimateConfig::default()).unwrap();
    assert_eq!(report.estimate.m, 8);
    assert!((report.estimate.upper - 9.656854249492383).abs() < 1e-12);
    assert!(report.margin > 0.0);
    assert!(report.estimate.lower >= 1.0 - 1e-12);
}

#[test]
fn identity_transfer_on_full_grid() {
    let delta = crate::dyadic::DyadicRational::new(1, 4);
    let r = check_transfer(
        &full_grid(6),
        None,
        2,
        delta,
        2.0,
        &Space::Scalar,
        &EstimateConfig::default(),
    )
    .unwrap();
    assert_eq!(r.system.root(), iv(0, 0));
    assert!((r.grid.lower - 1.0).abs() < 1e-6);
    assert!((r.inequality.ratio_blocks - r.inequality.ratio_grid).abs() < 1e-9);
    assert!(r.margin > 0.0);
}

#[test]
fn transfer_factor_near_one_for_small_delta() {
    let delta = crate::dyadic::DyadicRational::new(1, 10);
    for p in [1.5, 2.0] {
        let factor = (1.0 - delta.to_f64()).powf(1.0 / p);
        assert!((1.0 - factor).abs() < 1e-3);
    }
    let r = check_transfer(
        &full_grid(5),
        None,
        2,
        delta,
        1.5,
        &Space::l1(7),
        &EstimateConfig::default(),
    )
    .unwrap();
    assert!((1.0 - r.inequality.ratio_factor) < 1e-3);
}

fn arb_collection() -> impl Strategy<Value = IntervalCollection> {
    proptest::collection::vec((0u32..=6, any::<u64>()), 1..24)
        .prop_map(|v| v.into_iter().map(|(l, k)| iv(l, k % (1 << l))).collect())
}

fn arb_family(e: &IntervalCollection, dim: usize, seed: u64) -> CoefficientFamily {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = CoefficientFamily::new(dim);
    for i in e.iter() {
        x.set(*i, (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .unwrap();
    }
    x
}

fn spaces() -> Vec<Space> {
    vec![
        Space::Scalar,
        Space::l1(3),
        Space::sequence(3, 1.5).unwrap(),
        Space::sequence(3, f64::INFINITY).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn synthesis_matches_exact_haar_sum(e in arb_collection(), seed in any::<u64>(), p in 1.1f64..=2.0) {
        let x = arb_family(&e, 2, seed);
        let f = synthesize(&e, &x, p).unwrap();
        let cells = oracle_cells(&x, p, f.resolution());
        for (c, expected) in cells.iter().enumerate() {
            for (a, b) in f.cell(c).iter().zip(expected) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn adjoint_pairs_with_synthesis(e in arb_collection(), seed in any::<u64>(), p in 1.1f64..=2.0) {
        use rand::{Rng, SeedableRng};
        let op = SynthesisOperator::for_collection(&e, p, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..e.len() * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..(2 << op.resolution())).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cell = 2f64.powi(-(op.resolution() as i32));
        let lhs: f64 = op.apply(&x).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() * cell;
        let rhs: f64 = x.iter().zip(op.adjoint(&g)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn single_interval_ratio_is_one(level in 0u32..8, k in any::<u64>(), v in 0.1f64..10.0, p in 1.05f64..=2.0) {
        let i = iv(level, k % (1 << level));
        let e: IntervalCollection = std::iter::once(i).collect();
        for space in spaces() {
            let mut x = CoefficientFamily::new(space.dim());
            let mut value = vec![0.0; space.dim()];
            value[0] = v;
            x.set(i, value).unwrap();
            let r = rayleigh_ratio(&e, &x, p, &space).unwrap();
            prop_assert!((r - 1.0).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn ratio_is_homogeneous(e in arb_collection(), seed in any::<u64>(), t in 0.01f64..100.0, p in 1.1f64..=2.0) {
        for space in spaces() {
            let x = arb_family(&e, space.dim(), seed);
            let a = rayleigh_ratio(&e, &x, p, &space).unwrap();
            let b = rayleigh_ratio(&e, &x.scaled(t), p, &space).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn parseval_for_any_coefficients(n in 0u32..6, seed in any::<u64>()) {
        let e = full_grid(n);
        let x = arb_family(&e, 1, seed);
        let r = rayleigh_ratio(&e, &x, 2.0, &Space::Scalar).unwrap();
        prop_assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_ascends(e in arb_collection(), seed in any::<u64>(), p in 1.1f64..=2.0) {
        let config = EstimateConfig { seed, restarts: 2, ..EstimateConfig::default() };
        for space in [Space::Scalar, Space::l1(2)] {
            let est = estimate_best_constant(&e, p, &space, &config).unwrap();
            for w in est.ascent.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-9), "{:?}", est.ascent);
            }
            prop_assert!(est.lower >= 1.0 - 1e-12);
            prop_assert!(est.lower <= est.upper + LEMMA1_TOLERANCE);
            let witness = rayleigh_ratio(&e, &est.witness, p, &space).unwrap();
            prop_assert_eq!(witness, est.lower);
        }
    }

    #[test]
    fn estimate_is_monotone_under_cross_seeding(e in arb_collection(), seed in any::<u64>(), p in 1.1f64..=2.0) {
        let sub: IntervalCollection = e.iter().step_by(2).copied().collect();
        let config = EstimateConfig { seed, restarts: 1, ..EstimateConfig::default() };
        let small = estimate_best_constant(&sub, p, &Space::Scalar, &config).unwrap();
        let large = estimate_best_constant_seeded(&e, p, &Space::Scalar, &config, std::slice::from_ref(&small.witness)).unwrap();
        prop_assert!(small.lower <= large.lower + 2.0 * config.tol);
    }
}
