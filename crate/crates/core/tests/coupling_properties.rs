use lra_core::circle::circle_dist;
use lra_core::lattice::rect_sites;
use lra_core::{chain_sites, BigRational, Circle, Coupling, LatticeState, LiftRule, Scalar, Site};
use proptest::prelude::*;

/// Normalised weights from raw positive draws.
fn normalise(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    // put the roundoff on the self weight so the sum is exactly 1
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    w
}

/// One coupling of each constructor, under both lift rules.
fn couplings(c: f64, raw: &[f64]) -> Vec<Coupling<f64>> {
    let k = normalise(raw);
    let toom = normalise(&raw[..3]);
    let base = vec![
        Coupling::diffusive(&chain_sites(6), c / 2.0).unwrap(),
        Coupling::diffusive(&rect_sites(3, 3), c / 4.0).unwrap(),
        Coupling::unidirectional(&chain_sites(6), c).unwrap(),
        Coupling::unidirectional_k(&chain_sites(6), &k).unwrap(),
        Coupling::toom_ne(&rect_sites(3, 3), [toom[0], toom[1], toom[2]]).unwrap(),
    ];
    base.into_iter()
        .flat_map(|cp| {
            [
                cp.clone().with_lift(LiftRule::SelfAnchored),
                cp.with_lift(LiftRule::UpstreamFolded),
            ]
        })
        .collect()
}

fn state(coupling: &Coupling<f64>, mut f: impl FnMut(&Site) -> f64) -> LatticeState<f64> {
    let layout = coupling.natural_box().unwrap().layout();
    LatticeState::from_fn(layout, |s| Circle::new(f(s)))
}

fn raw_weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..1.0f64, 3..5)
}

proptest! {
    #[test]
    fn constant_states_are_fixed(value in 0.0..1.0f64, c in 0.05..0.95f64, raw in raw_weights()) {
        for coupling in couplings(c, &raw) {
            let x = state(&coupling, |_| value);
            let y = coupling.apply_interaction(&x).unwrap();
            for v in y.values() {
                prop_assert!(circle_dist(v, &Circle::new(value)) <= 1e-15);
            }
        }
    }

    /// `ρ((Ix)_ℓ, (Iy)_ℓ) <= Λ_I Σ_i ρ(x_i, y_i)` over the stencil of ℓ, for
    /// states whose values all lie within 1/4 of each other, where the
    /// interaction is exactly linear.
    #[test]
    fn interaction_bound_near_the_diagonal(
        centre in 0.0..1.0f64,
        c in 0.05..0.95f64,
        raw in raw_weights(),
        spread in prop::collection::vec(-0.1..0.1f64, 20),
        kick in prop::collection::vec(-0.02..0.02f64, 20),
    ) {
        for coupling in couplings(c, &raw) {
            let lambda = coupling.interaction_lambda();
            let mut k = 0;
            let x = state(&coupling, |_| { k += 1; centre + spread[k % 20] });
            let mut k = 0;
            let y = state(&coupling, |_| { k += 1; centre + spread[k % 20] + kick[(k * 7) % 20] });
            let (ix, iy) = (coupling.apply_interaction(&x).unwrap(), coupling.apply_interaction(&y).unwrap());
            for (site, row) in coupling.stencils() {
                let budget: f64 = row.iter().map(|(s, _)| circle_dist(x.get(s).unwrap(), y.get(s).unwrap())).sum();
                let out = circle_dist(ix.get(site).unwrap(), iy.get(site).unwrap());
                prop_assert!(out <= lambda * budget + 1e-12, "site {site}: {out} > {lambda} * {budget}");
            }
        }
    }

    #[test]
    fn one_coordinate_changes_contract(
        centre in 0.0..1.0f64,
        c in 0.05..0.95f64,
        raw in raw_weights(),
        spread in prop::collection::vec(-0.1..0.1f64, 20),
        which in 0usize..100,
        delta in -0.02..0.02f64,
    ) {
        for coupling in couplings(c, &raw) {
            let lambda = coupling.interaction_lambda();
            let layout = coupling.natural_box().unwrap().layout();
            let moved = layout.sites()[which % layout.len()];
            let mut k = 0;
            let x = state(&coupling, |_| { k += 1; centre + spread[k % 20] });
            let mut y = x.clone();
            y.set(&moved, x.get(&moved).unwrap().shifted(&delta)).unwrap();
            let (ix, iy) = (coupling.apply_interaction(&x).unwrap(), coupling.apply_interaction(&y).unwrap());
            for site in coupling.stencils().keys() {
                let out = circle_dist(ix.get(site).unwrap(), iy.get(site).unwrap());
                prop_assert!(out <= lambda * delta.abs() + 1e-15, "site {site}: {out} vs {lambda} * {delta}");
            }
        }
    }

    #[test]
    fn exact_interaction_bound(
        num in prop::collection::vec(0i64..50, 16),
        kick in prop::collection::vec(-3i64..4, 16),
    ) {
        let w = [BigRational::ratio(1, 5), BigRational::ratio(2, 5), BigRational::ratio(2, 5)];
        let coupling = Coupling::unidirectional_k(&chain_sites(12), &w).unwrap();
        let layout = coupling.natural_box().unwrap().layout();
        let mut k = 0;
        let x = LatticeState::from_fn(layout.clone(), |_| { k += 1; Circle::new(BigRational::ratio(num[k % 16] + 300, 1000)) });
        let mut k = 0;
        let y = LatticeState::from_fn(layout, |_| { k += 1; Circle::new(BigRational::ratio(num[k % 16] + 300 + kick[k % 16], 1000)) });
        let (ix, iy) = (coupling.apply_interaction(&x).unwrap(), coupling.apply_interaction(&y).unwrap());
        let lambda = coupling.interaction_lambda();
        for (site, row) in coupling.stencils() {
            let mut budget = BigRational::from_i64(0);
            for (s, _) in row {
                budget = budget + circle_dist(x.get(s).unwrap(), y.get(s).unwrap());
            }
            prop_assert!(circle_dist(ix.get(site).unwrap(), iy.get(site).unwrap()) <= lambda.clone() * budget);
        }
    }
}

#[test]
fn short_range_radius_is_exact() {
    let cases: Vec<(Coupling<f64>, u64)> = vec![
        (Coupling::diffusive(&chain_sites(5), 0.2).unwrap(), 1),
        (Coupling::unidirectional(&chain_sites(5), 0.7).unwrap(), 1),
        (
            Coupling::unidirectional_k(&chain_sites(8), &[0.2, 0.4, 0.4]).unwrap(),
            2,
        ),
        (
            Coupling::unidirectional_k(&chain_sites(8), &[0.4, 0.2, 0.2, 0.2]).unwrap(),
            3,
        ),
        (
            Coupling::toom_ne(&rect_sites(3, 3), [0.2, 0.4, 0.4]).unwrap(),
            1,
        ),
    ];
    for (coupling, r) in cases {
        assert_eq!(coupling.radius(), r);
        assert!(coupling.check_short_range(r).is_ok());
        assert!(coupling.check_short_range(r - 1).is_err());
    }
}
