use lra_core::analysis::{
    fit_rate, lra_probe, random_boundary, sensitivity_experiment, LinearRegion, ProbeOptions,
};
use lra_core::{chain_sites, BoundaryCondition, Circle, Coupling, EngineConfig, LocalMap};
use proptest::prelude::*;

fn doubling_chain(n: usize, boundary_seed: u64) -> EngineConfig<f64> {
    let coupling = Coupling::unidirectional_k(&chain_sites(n), &[0.2, 0.4, 0.4]).unwrap();
    let bx = coupling.natural_box().unwrap();
    EngineConfig::new(
        LocalMap::doubling(),
        coupling,
        BoundaryCondition::Frozen(random_boundary(&bx, boundary_seed)),
    )
    .unwrap()
}

fn opts(seed: u64, t_max: usize, tol: f64) -> ProbeOptions {
    ProbeOptions {
        n_initials: 3,
        t_max,
        tol,
        seed,
        override_condition: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Independent initial data reach the same limit, at a rate within the
    /// contraction bound once the states are close. The early transient sits
    /// near the maximal circle distance and is excluded from the fit.
    #[test]
    fn limits_are_unique_and_rates_bounded(boundary in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let tol = 1e-10;
        let config = doubling_chain(8, boundary);
        let (a, b) = (lra_probe(&config, &opts(s1, 200, tol)).unwrap(), lra_probe(&config, &opts(s2, 200, tol)).unwrap());
        prop_assert!(a.converged && b.converged);
        for (site, u) in &a.limit_solution {
            let d = lra_core::circle_dist(&Circle::new(*u), &Circle::new(b.limit_solution[site]));
            prop_assert!(d <= 10.0 * tol, "site {site}: {d}");
        }
        for r in [&a, &b] {
            let close = r.max_distances.iter().position(|&d| d < 1e-3).unwrap();
            let rate = fit_rate(&r.max_distances[close..]).unwrap();
            prop_assert!(rate <= r.rate_bound + 0.05, "rate {rate} vs bound {}", r.rate_bound);
        }
    }

    /// Frozen boundary values at a fixed point pin the whole limit there.
    #[test]
    fn fixed_point_propagates(v in 0.0..1.0f64, seed in any::<u64>()) {
        let map = LocalMap::linear_near_fixed_point(v, 1.2, 0.3).unwrap();
        let coupling = Coupling::unidirectional(&chain_sites(10), 0.7).unwrap();
        let bx = coupling.natural_box().unwrap();
        let config = EngineConfig::new(map, coupling, BoundaryCondition::frozen_uniform(&bx, Circle::new(v))).unwrap();
        let tol = 1e-9;
        let report = lra_probe(&config, &opts(seed, 400, tol)).unwrap();
        prop_assert!(report.converged);
        for u in report.limit_solution.values() {
            prop_assert!(lra_core::circle_dist(&Circle::new(*u), &Circle::new(v)) <= tol);
        }
    }
}

/// The first-site response to a boundary shift is linear in the shift.
#[test]
fn limit_depends_linearly_on_small_boundary_shifts() {
    let map = LocalMap::linear_near_fixed_point(0.5, 1.2, 0.3).unwrap();
    let coupling = Coupling::unidirectional(&chain_sites(6), 0.7).unwrap();
    let bx = coupling.natural_box().unwrap();
    let config = EngineConfig::new(
        map,
        coupling,
        BoundaryCondition::frozen_uniform(&bx, Circle::new(0.5)),
    )
    .unwrap();
    let region = LinearRegion {
        lo: 0.35,
        hi: 0.65,
        slope: 1.2,
    };
    let ratios: Vec<f64> = [1e-6, 1e-5, 1e-4]
        .iter()
        .map(|&delta| {
            let r =
                sensitivity_experiment(&config, &region, 0.5, delta, &opts(9, 600, 1e-14)).unwrap();
            assert!(r.converged);
            r.simulated_ratio.unwrap()
        })
        .collect();
    for r in &ratios {
        assert!((r / ratios[2] - 1.0).abs() <= 0.05, "{ratios:?}");
    }
}
