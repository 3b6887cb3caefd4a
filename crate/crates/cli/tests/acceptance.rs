//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! lines always reach the output.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lra_core::analysis::{
    free_bc_probe, lra_probe, periodic_nonuniqueness_demo, random_boundary, random_point,
    sensitivity_experiment, LinearRegion, ProbeOptions,
};
use lra_core::stochastic::{
    contraction_diagnostic, instability_experiment, EnsembleConfig, PerturbationSpec,
};
use lra_core::{
    chain_sites, BigRational, BoundaryCondition, Circle, ConnectivityGraph, Coupling, EngineConfig,
    LocalMap, Scalar, Site,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn standard_chain<S: Scalar>(n: usize) -> Coupling<S> {
    Coupling::unidirectional_k(
        &chain_sites(n),
        &[S::ratio(1, 5), S::ratio(2, 5), S::ratio(2, 5)],
    )
    .unwrap()
}

/// Reachability closure by repeated relaxation; a vertex on a cycle reaches itself.
fn closure_has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).any(|i| reach[i][i])
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut acyclic, mut disagreements) = (0, Vec::new());
    for trial in 0..1000 {
        let p = if trial % 2 == 0 { 0.1 } else { 0.3 };
        let n = rng.gen_range(1..=12usize);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        let boundary = Site::D1(-1);
        let mut site_edges: Vec<(Site, Site)> = edges
            .iter()
            .map(|&(a, b)| (Site::D1(a as i64), Site::D1(b as i64)))
            .collect();
        for j in 0..n {
            if rng.gen_bool(p) {
                site_edges.push((boundary, Site::D1(j as i64)));
            }
        }
        let graph =
            ConnectivityGraph::from_edges((0..n as i64).map(Site::D1), [boundary], site_edges)
                .unwrap();
        let oracle_cycle = closure_has_cycle(n, &edges);
        match graph.enumerate() {
            Ok(e) if !oracle_cycle && graph.validate_enumeration(&e) => acyclic += 1,
            Err(lra_core::TopologyError::CycleDetected(w)) if oracle_cycle => {
                let is_cycle = (0..w.len()).all(|k| {
                    let (a, b) = (w[k], w[(k + 1) % w.len()]);
                    graph.edges().contains(&(a, b))
                });
                if !is_cycle {
                    disagreements.push(format!("trial {trial}: bad witness"));
                }
            }
            other => disagreements.push(format!(
                "trial {trial}: oracle cycle={oracle_cycle}, got {other:?}"
            )),
        }
    }
    check(
        disagreements.is_empty(),
        format!(
            "1000 graphs, {acyclic} acyclic enumerated and validated, {} disagreements{}",
            disagreements.len(),
            disagreements
                .first()
                .map_or(String::new(), |d| format!(" (first: {d})"))
        ),
    )
}

fn criterion_2() -> Outcome {
    let coupling = standard_chain::<f64>(16);
    let bx = coupling.natural_box().unwrap();
    let bc = BoundaryCondition::Frozen(random_boundary(&bx, 7));
    let config = EngineConfig::new(LocalMap::doubling(), coupling, bc).unwrap();
    // 20 initial states: every one of their 190 pairs, which includes 10 disjoint pairs
    let opts = ProbeOptions {
        n_initials: 20,
        t_max: 100,
        tol: 1e-6,
        seed: 11,
        override_condition: false,
    };
    let r = lra_probe(&config, &opts).map_err(|e| e.to_string())?;
    let rate = r.fitted_rate.unwrap_or(f64::NAN);
    check(
        r.converged && rate <= 0.85,
        format!(
            "max pairwise distance at t=100 {:.3e} (<= 1e-6), fitted rate {rate:.4} (<= 0.85), bound {}",
            r.max_final_distance, r.rate_bound
        ),
    )
}

fn criterion_3() -> Outcome {
    // exact arithmetic: in f64 every doubling orbit reaches 0 on its own
    let coupling = standard_chain::<BigRational>(16);
    let bx = coupling.natural_box().unwrap();
    let config = EngineConfig::new(
        LocalMap::doubling(),
        coupling,
        BoundaryCondition::frozen_uniform(&bx, Circle::zero()),
    )
    .unwrap();
    let engine = config.build().unwrap();
    let zero = engine.state_with_interior(|_| Circle::zero());
    let mut worst = 0.0f64;
    for run in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + run);
        let mut s = engine.state_with_interior(|_| random_point(&mut rng));
        for _ in 0..300 {
            s = engine.step(&s);
        }
        worst = worst.max(s.interior_sup_distance(&zero).to_f64());
    }
    check(
        worst <= 1e-10,
        format!("exact arithmetic, 10 random interiors; max distance to 0 at t=300: {worst:.3e} (<= 1e-10)"),
    )
}

fn criterion_4() -> Outcome {
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
    let opts = ProbeOptions {
        n_initials: 2,
        t_max: 600,
        tol: 1e-13,
        seed: 5,
        override_condition: false,
    };
    let r =
        sensitivity_experiment(&config, &region, 0.5, 1e-4, &opts).map_err(|e| e.to_string())?;
    let simulated = r.simulated_ratio.unwrap_or(f64::NAN);
    let first_ok = ((simulated - 1.3125) / 1.3125).abs() <= 1e-3;
    let mut growth_ok = r.converged;
    let mut growth = Vec::new();
    for l in 1..=4u32 {
        let expected = 1.3125f64.powi(l as i32);
        match r
            .per_site_growth
            .iter()
            .find(|g| g.l.finite() == Some(l as u64))
        {
            Some(g) => {
                growth_ok &= ((g.ratio - expected) / expected).abs() <= 0.1;
                growth.push(format!("L={l}: {:.4}/{expected:.4}", g.ratio));
            }
            None => growth_ok = false,
        }
    }
    check(
        first_ok && growth_ok,
        format!(
            "first-site ratio {simulated:.6} vs analytic {:.6}; {}",
            r.analytic_ratio,
            growth.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let coupling = standard_chain::<BigRational>(8);
    let bx = coupling.natural_box().unwrap();
    let bc = BoundaryCondition::Free(random_boundary(&bx, 21));
    let config = EngineConfig::new(LocalMap::doubling(), coupling, bc).unwrap();
    let opts = ProbeOptions {
        n_initials: 4,
        t_max: 150,
        tol: 1e-6,
        seed: 22,
        override_condition: false,
    };
    let r = free_bc_probe(&config, &opts).map_err(|e| e.to_string())?;
    check(
        r.mutual_convergence && r.temporal_variation > 1e-3,
        format!(
            "exact arithmetic; mutual distance at t=150 {:.3e} (<= 1e-6), temporal variation over last {} steps {:.4} (> 1e-3)",
            r.final_mutual_distance, r.variation_window, r.temporal_variation
        ),
    )
}

fn criterion_6() -> Outcome {
    let coupling = standard_chain::<BigRational>(8);
    let config =
        EngineConfig::new(LocalMap::doubling(), coupling, BoundaryCondition::Periodic).unwrap();
    let r = periodic_nonuniqueness_demo(
        &config,
        Circle::zero(),
        Circle::new(BigRational::ratio(1, 3)),
        (1, 2),
        1000,
    )
    .map_err(|e| e.to_string())?;
    check(
        r.max_spatial_variation <= 1e-15 && r.min_separation >= 1.0 / 3.0 - 1e-12,
        format!(
            "exact arithmetic, 1000 steps; min separation {:.15} (>= 1/3 - 1e-12), spatial variation {:.1e}",
            r.min_separation, r.max_spatial_variation
        ),
    )
}

fn criterion_7() -> Outcome {
    let map = LocalMap::linear_near_fixed_point(0.5, 1.2, 0.3).unwrap();
    let coupling = Coupling::unidirectional(&chain_sites(8), 0.7).unwrap();
    let bx = coupling.natural_box().unwrap();
    let values: BTreeMap<Site, Circle<f64>> = random_boundary(&bx, 70);
    let variant = EngineConfig::new(map, coupling, BoundaryCondition::Frozen(values.clone()))
        .unwrap()
        .with_premap(true);
    let variant_engine = variant.build().unwrap();
    let witness = variant_engine
        .premap_equivalence_witness(&values)
        .map_err(|e| e.to_string())?;
    let plain_engine = variant
        .clone()
        .with_premap(false)
        .with_bc(BoundaryCondition::Frozen(witness))
        .build()
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let init: Vec<Circle<f64>> = (0..8).map(|_| random_point(&mut rng)).collect();
    let mut a = variant_engine.state_with_interior(|s| init[(s.coords()[0] - 1) as usize].clone());
    let mut b = plain_engine.state_with_interior(|s| init[(s.coords()[0] - 1) as usize].clone());
    let mut worst = 0.0f64;
    for _ in 0..100 {
        a = variant_engine.step(&a);
        b = plain_engine.step(&b);
        worst = worst.max(a.interior_sup_distance(&b));
    }
    check(
        worst <= 1e-12,
        format!("max interior difference over 100 steps {worst:.3e} (<= 1e-12)"),
    )
}

fn ensemble(eps: f64) -> EnsembleConfig<f64> {
    let coupling = standard_chain::<f64>(12);
    let bx = coupling.natural_box().unwrap();
    let bc = BoundaryCondition::Frozen(random_boundary(&bx, 8));
    EnsembleConfig {
        engine: EngineConfig::new(LocalMap::doubling(), coupling, bc).unwrap(),
        perturbation: PerturbationSpec::uniform_arc(eps).unwrap(),
        n_trajectories: 400,
        burn_in: 1000,
        horizon: 2000,
        seed: 80,
        bins: 1024,
    }
}

fn criterion_8() -> Outcome {
    let noisy = instability_experiment(&ensemble(0.005), false).map_err(|e| e.to_string())?;
    let control = instability_experiment(&ensemble(0.0), false).map_err(|e| e.to_string())?;
    let cap = 2.0 / (2.0 * 1024.0);
    let control_max = control
        .per_site
        .iter()
        .map(|s| s.s_minus)
        .fold(0.0, f64::max);
    let profile: Vec<String> = noisy
        .per_site
        .iter()
        .map(|s| format!("{}:{:.4}", s.l, s.s_minus))
        .collect();
    check(
        noisy.correlation >= 0.9 && noisy.fitted_slope > 0.0 && control_max <= cap,
        format!(
            "rank correlation {:.3} (>= 0.9), slope {:.5} (> 0), gamma_hat {:.3}; eps=0 max s_minus {control_max:.2e} (<= {cap:.2e}); L:s_minus {}",
            noisy.correlation,
            noisy.fitted_slope,
            noisy.gamma_hat.unwrap_or(f64::NAN),
            profile.join(" ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let config = ensemble(0.005);
    let r = contraction_diagnostic(&config, &Site::D1(1), 0.2, 0.1).map_err(|e| e.to_string())?;
    check(
        r.within_bound && !r.empirical_factors.is_empty(),
        format!(
            "site 1: geometric-mean W1 factor {:.4} over {} pre-floor steps (<= {} + 0.1)",
            r.geometric_mean,
            r.empirical_factors.len(),
            r.bound
        ),
    )
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_lra");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut entries: Vec<_> = std::fs::read_dir(&configs)
        .map_err(|e| format!("{}: {e}", configs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err("no shipped configs".into());
    }
    let scratch = std::env::temp_dir().join(format!("lra-acceptance-{}", std::process::id()));
    let mut compared = 0;
    for cfg in &entries {
        let stem = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let text = std::fs::read_to_string(cfg).map_err(|e| e.to_string())?;
        let doc: toml::Table = text.parse().map_err(|e| format!("{stem}: {e}"))?;
        let command = doc
            .get("experiment")
            .and_then(|e| e.get("command"))
            .and_then(|c| c.as_str())
            .ok_or(format!("{stem}: no experiment.command"))?
            .to_string();
        let mut outputs = Vec::new();
        // different thread counts: reports must not depend on the schedule
        for (rep, threads) in ["2", "8"].iter().enumerate() {
            let out = scratch.join(format!("{stem}-{rep}"));
            let run = Command::new(bin)
                .args([command.as_str(), "--config"])
                .arg(cfg)
                .arg("--out")
                .arg(&out)
                .args(["--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            if !run.status.success() {
                return Err(format!(
                    "{stem}: exit {}: {}",
                    run.status,
                    String::from_utf8_lossy(&run.stderr).trim()
                ));
            }
            outputs.push(out);
        }
        let files = |dir: &Path| -> Vec<(String, Vec<u8>)> {
            let mut v: Vec<_> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| {
                    let p = e.unwrap().path();
                    (
                        p.file_name().unwrap().to_string_lossy().to_string(),
                        std::fs::read(&p).unwrap(),
                    )
                })
                .collect();
            v.sort();
            v
        };
        let (a, b) = (files(&outputs[0]), files(&outputs[1]));
        if a.is_empty() || a != b {
            return Err(format!("{stem}: report files differ between runs"));
        }
        compared += a.len();
    }
    let _ = std::fs::remove_dir_all(&scratch);
    Ok(format!("{} shipped configs, {compared} report files byte-identical across runs with 2 and 8 threads", entries.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        (
            "enumeration succeeds exactly on acyclic graphs",
            criterion_1,
            Some(Duration::from_secs(30)),
        ),
        (
            "LRA on the 16-site chain",
            criterion_2,
            Some(Duration::from_secs(5)),
        ),
        ("fixed-point boundary propagates", criterion_3, None),
        ("boundary sensitivity amplification", criterion_4, None),
        (
            "free boundary: mutual convergence, moving limit",
            criterion_5,
            None,
        ),
        (
            "periodic boundary: two separated solutions",
            criterion_6,
            None,
        ),
        ("pre-map variant equivalence", criterion_7, None),
        (
            "noise: lower spread grows with boundary distance",
            criterion_8,
            Some(Duration::from_secs(120)),
        ),
        (
            "Wasserstein contraction at a boundary site",
            criterion_9,
            None,
        ),
        (
            "shipped experiments reproduce byte for byte",
            criterion_10,
            None,
        ),
    ];
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over_time = limit.is_some_and(|l| elapsed > l);
        let (verdict, detail) = match &outcome {
            Ok(d) if !over_time => ("PASS", d.clone()),
            Ok(d) => (
                "FAIL",
                format!("{d}; took {elapsed:.1?}, limit {:?}", limit.unwrap()),
            ),
            Err(d) => ("FAIL", d.clone()),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "acceptance {:>2} {verdict}: {name} — {detail} [{elapsed:.2?}]",
            k + 1
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
