use lra_core::circle::circle_dist;
use lra_core::lattice::Layout;
use lra_core::{chain_sites, BigRational, Circle, LatticeState, LocalMap, Scalar, Site};
use proptest::prelude::*;
use std::sync::Arc;

fn c(x: f64) -> Circle<f64> {
    Circle::new(x)
}

/// Every map the crate ships, with its declared constants.
fn shipped_maps() -> Vec<(&'static str, LocalMap<f64>)> {
    vec![
        ("doubling", LocalMap::doubling()),
        ("rotation", LocalMap::rotation(0.318)),
        ("affine", LocalMap::affine(3.0, 0.1)),
        (
            "near-fixed",
            LocalMap::linear_near_fixed_point(0.5, 1.2, 0.3).unwrap(),
        ),
        (
            "near-fixed-wrapping",
            LocalMap::linear_near_fixed_point(0.05, 1.5, 0.2).unwrap(),
        ),
        (
            "piecewise",
            LocalMap::piecewise(vec![0.0, 0.25, 0.5], vec![0.5, 2.0, 0.75], 0.1).unwrap(),
        ),
    ]
}

proptest! {
    #[test]
    fn circle_distance_is_a_metric(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        let (a, b, cc) = (c(x), c(y), c(z));
        let ab = circle_dist(&a, &b);
        prop_assert!((0.0..=0.5).contains(&ab));
        prop_assert_eq!(ab, circle_dist(&b, &a));
        prop_assert_eq!(circle_dist(&a, &a), 0.0);
        prop_assert!(circle_dist(&a, &cc) <= ab + circle_dist(&b, &cc) + 1e-15);
    }

    #[test]
    fn exact_circle_distance_is_a_metric(p in -50i64..50, q in -50i64..50, r in -50i64..50, d in 1i64..40) {
        let pt = |k: i64| Circle::new(BigRational::ratio(k, d));
        let (a, b, cc) = (pt(p), pt(q), pt(r));
        let ab = circle_dist(&a, &b);
        prop_assert_eq!(ab.clone(), circle_dist(&b, &a));
        prop_assert_eq!(ab.clone() == BigRational::from_i64(0), (p - q).rem_euclid(d) == 0);
        prop_assert!(circle_dist(&a, &cc) <= ab + circle_dist(&b, &cc));
    }

    #[test]
    fn declared_lipschitz_constants_hold(x in 0.0..1.0f64, frac in 0.0..1.0f64) {
        for (name, t) in shipped_maps() {
            let sigma = t.sigma;
            let (a, b) = (c(x), c(x + frac * sigma));
            let before = circle_dist(&a, &b);
            let after = circle_dist(&t.apply(&a), &t.apply(&b));
            prop_assert!(after >= t.lambda_lower * before - 1e-9, "{name}: {after} < {} * {before}", t.lambda_lower);
            prop_assert!(after <= t.lambda_upper * before + 1e-9, "{name}: {after} > {} * {before}", t.lambda_upper);
        }
    }

    #[test]
    fn state_copies_are_independent(values in prop::collection::vec(0.0..1.0f64, 6), k in 0usize..4, v in 0.0..1.0f64) {
        let sites = chain_sites(4);
        let layout = Arc::new(Layout::new(sites.clone(), vec![Site::D1(0), Site::D1(5)]));
        let original = LatticeState::from_values(layout, values.iter().map(|x| c(*x)).collect());
        let snapshot: Vec<f64> = original.values().iter().map(|x| x.to_f64()).collect();
        let mut copy = original.clone();
        copy.set(&sites[k], c(v)).unwrap();
        let after: Vec<f64> = original.values().iter().map(|x| x.to_f64()).collect();
        prop_assert_eq!(snapshot, after);
    }
}

#[test]
fn every_shipped_map_validates() {
    for (name, t) in shipped_maps() {
        t.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        let report = t.verify_lipschitz(2000).unwrap();
        assert!(report.max_observed_ratio <= t.lambda_upper + 1e-9, "{name}");
    }
}
