//! Deterministic experiments on the engine: convergence to a unique limit
//! solution, rate fits, boundary sensitivity, free and periodic boundaries.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circle::{circle_dist, Circle};
use crate::engine::{BoundaryCondition, Engine, EngineConfig, EngineError};
use crate::lattice::{BoxSpec, LatticeState, Site};
use crate::scalar::Scalar;
use crate::topology::{BoundaryDistance, ConnectivityGraph, TopologyError};

/// Distances at or below this are treated as roundoff when fitting rates. f64
/// runs of expanding maps stall on a roundoff plateau near 1e-14.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Random points are drawn from the grid `k / RANDOM_GRID`. The modulus is an
/// odd prime, so exact rational points have non-dyadic, chaotic orbits.
pub const RANDOM_GRID: i64 = 999_983;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("coupling is not unidirectional: {0}")]
    NotUnidirectional(TopologyError),
    #[error("contraction condition violated: Λ_I Λ_T = {0} >= 1")]
    ConditionViolated(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("need at least 10 distances above the floor, got {0}")]
    InsufficientData(usize),
    #[error("degenerate parameters: c a - (a - 1) = 0")]
    Degenerate,
    #[error("{0} does not return to itself within the declared period")]
    NotPeriodicPoint(f64),
}

/// Uniform draw from the grid `k / RANDOM_GRID`.
pub fn random_point<S: Scalar>(rng: &mut impl Rng) -> Circle<S> {
    Circle::new(S::ratio(rng.gen_range(0..RANDOM_GRID), RANDOM_GRID))
}

/// Independent random values on every shell site.
pub fn random_boundary<S: Scalar>(bx: &BoxSpec, seed: u64) -> BTreeMap<Site, Circle<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bx.boundary()
        .iter()
        .map(|s| (*s, random_point(&mut rng)))
        .collect()
}

/// Generator for initial state `run`: stream `run + 1` of the seed (stream 0
/// is left for boundary data).
fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64 + 1);
    rng
}

/// Initial state `run` of every probe: uniform random interior, configured shell.
pub fn random_initial<S: Scalar>(engine: &Engine<S>, seed: u64, run: usize) -> LatticeState<S> {
    let mut rng = run_rng(seed, run);
    engine.state_with_interior(|_| random_point(&mut rng))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub n_initials: usize,
    pub t_max: usize,
    pub tol: f64,
    pub seed: u64,
    /// Run even when `Λ_I Λ_T >= 1`.
    pub override_condition: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n_initials: 4,
            t_max: 200,
            tol: 1e-8,
            seed: 0,
            override_condition: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LraReport {
    pub converged: bool,
    /// Interior of the final state of run 0.
    pub limit_solution: BTreeMap<Site, f64>,
    /// `None` when fewer than 10 distances lie above the floor.
    pub fitted_rate: Option<f64>,
    pub rate_bound: f64,
    pub max_final_distance: f64,
    pub seed: u64,
    pub n_initials: usize,
    pub t_max: usize,
    pub tol: f64,
    /// Interior sites in layout order, matching the columns of `per_site_distances`.
    pub sites: Vec<Site>,
    /// Max pairwise distance between runs; `[t][site]`.
    #[serde(skip)]
    pub per_site_distances: Vec<Vec<f64>>,
    /// Max over sites of `per_site_distances`.
    #[serde(skip)]
    pub max_distances: Vec<f64>,
}

impl LraReport {
    /// CSV `t,max,<site>...`.
    pub fn distances_csv(&self) -> String {
        let header = ["t".to_string(), "max".to_string()]
            .into_iter()
            .chain(self.sites.iter().map(Site::to_string));
        let rows = self.per_site_distances.iter().enumerate().map(|(t, row)| {
            [t.to_string(), self.max_distances[t].to_string()]
                .into_iter()
                .chain(row.iter().map(f64::to_string))
                .collect::<Vec<_>>()
        });
        crate::table::csv(header, rows)
    }
}

/// Checks unidirectionality and, unless overridden, `Λ_I Λ_T < 1`.
fn check_hypotheses<S: Scalar>(
    config: &EngineConfig<S>,
    override_condition: bool,
) -> Result<f64, AnalysisError> {
    let graph = ConnectivityGraph::build(&config.coupling, &config.bx)
        .map_err(AnalysisError::NotUnidirectional)?;
    if let Some(cycle) = graph.detect_cycle() {
        return Err(AnalysisError::NotUnidirectional(
            TopologyError::CycleDetected(cycle),
        ));
    }
    let mut lambda_t = config.map.lambda_upper.clone();
    for m in config.site_maps.values() {
        if m.lambda_upper > lambda_t {
            lambda_t = m.lambda_upper.clone();
        }
    }
    let product = (config.coupling.interaction_lambda() * lambda_t).to_f64();
    if product >= 1.0 && !override_condition {
        return Err(AnalysisError::ConditionViolated(product));
    }
    Ok(product)
}

/// Runs `n` random initial interiors in lockstep and records, per step, the
/// largest pairwise distance at every site.
struct Ensemble<S> {
    states: Vec<LatticeState<S>>,
    per_site: Vec<Vec<f64>>,
}

impl<S: Scalar> Ensemble<S> {
    fn run(engine: &Engine<S>, n: usize, t_max: usize, seed: u64) -> Self {
        let mut states: Vec<LatticeState<S>> =
            (0..n).map(|r| random_initial(engine, seed, r)).collect();
        let mut per_site = vec![pairwise_site_max(&states)];
        for _ in 0..t_max {
            states.par_iter_mut().for_each(|s| *s = engine.step(s));
            per_site.push(pairwise_site_max(&states));
        }
        Ensemble { states, per_site }
    }
}

fn pairwise_site_max<S: Scalar>(states: &[LatticeState<S>]) -> Vec<f64> {
    let n = states[0].layout().n_interior();
    let mut out = vec![0.0f64; n];
    for (a, sa) in states.iter().enumerate() {
        for sb in &states[a + 1..] {
            for (k, (x, y)) in sa
                .interior_values()
                .iter()
                .zip(sb.interior_values())
                .enumerate()
            {
                out[k] = out[k].max(circle_dist(x, y).to_f64());
            }
        }
    }
    out
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(0.0, f64::max)
}

fn interior_map<S: Scalar>(state: &LatticeState<S>) -> BTreeMap<Site, f64> {
    state
        .layout()
        .interior()
        .iter()
        .zip(state.interior_values())
        .map(|(s, x)| (*s, x.to_f64()))
        .collect()
}

/// Rate of the decaying part of a distance series: from its peak up to the
/// first entry at or below the floor.
fn decaying_rate(series: &[f64]) -> Option<f64> {
    let peak = series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)?;
    let last = series[peak..]
        .iter()
        .position(|&d| d <= DISTANCE_FLOOR)
        .map_or(series.len() - 1, |k| peak + k - 1);
    if last <= peak {
        return None;
    }
    fit_rate(&series[peak..=last]).ok()
}

/// Convergence of independent random initial data under one boundary condition.
pub fn lra_probe<S: Scalar>(
    config: &EngineConfig<S>,
    opts: &ProbeOptions,
) -> Result<LraReport, AnalysisError> {
    if opts.n_initials < 2 {
        return Err(AnalysisError::Precondition(
            "n_initials must be at least 2".into(),
        ));
    }
    let rate_bound = check_hypotheses(config, opts.override_condition)?;
    let engine = config.build()?;
    let ens = Ensemble::run(&engine, opts.n_initials, opts.t_max, opts.seed);
    let max_distances: Vec<f64> = ens.per_site.iter().map(|r| row_max(r)).collect();
    let max_final_distance = *max_distances.last().unwrap();
    Ok(LraReport {
        converged: max_final_distance <= opts.tol,
        limit_solution: interior_map(&ens.states[0]),
        fitted_rate: decaying_rate(&max_distances),
        rate_bound,
        max_final_distance,
        seed: opts.seed,
        n_initials: opts.n_initials,
        t_max: opts.t_max,
        tol: opts.tol,
        sites: engine.layout().interior().to_vec(),
        per_site_distances: ens.per_site,
        max_distances,
    })
}

/// Least-squares slope of `log d` against `t`, exponentiated; only entries
/// above the floor take part (with their original time index).
pub fn fit_rate(distances: &[f64]) -> Result<f64, AnalysisError> {
    let points: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > DISTANCE_FLOOR)
        .map(|(t, &d)| (t as f64, d.ln()))
        .collect();
    if points.len() < 10 {
        return Err(AnalysisError::InsufficientData(points.len()));
    }
    Ok(least_squares_slope(&points).exp())
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// First-site limit `(c a v + b) / (c a - (a - 1))` for a site map locally
/// equal to `x -> a x + b` and boundary value `v`.
pub fn analytic_limit_linear(a: f64, b: f64, c: f64, v: f64) -> Result<f64, AnalysisError> {
    let denom = c * a - (a - 1.0);
    if denom == 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    Ok((c * a * v + b) / denom)
}

/// Amplification `c a / (c a - (a - 1))` of a boundary perturbation per site.
pub fn sensitivity_ratio(a: f64, c: f64) -> Result<f64, AnalysisError> {
    let denom = c * a - (a - 1.0);
    if denom == 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    Ok(c * a / denom)
}

/// Where the local map is linear with a known slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearRegion {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
}

impl LinearRegion {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteGrowth {
    pub site: Site,
    pub l: BoundaryDistance,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub analytic_ratio: f64,
    /// `|û₁ - û′₁| / delta` at the first site, `None` if `delta = 0`.
    pub simulated_ratio: Option<f64>,
    /// Limit difference over `delta`, for sites ordered by boundary distance.
    pub per_site_growth: Vec<SiteGrowth>,
    /// Sites whose limit left the linear region; growth is not reported for them.
    pub left_linear_region: Vec<Site>,
    pub v: f64,
    pub delta: f64,
    pub c: f64,
    pub converged: bool,
    pub seed: u64,
}

/// Limits under homogeneous frozen boundaries `v` and `v + delta`, compared
/// with the analytic amplification `c a / (c a - (a - 1))`, where `c` is the
/// smallest total cross weight.
pub fn sensitivity_experiment<S: Scalar>(
    config: &EngineConfig<S>,
    region: &LinearRegion,
    v: S,
    delta: S,
    opts: &ProbeOptions,
) -> Result<SensitivityReport, AnalysisError> {
    let (_, c) = config.coupling.spread_coefficients();
    let c = c.to_f64();
    let analytic_ratio = sensitivity_ratio(region.slope, c)?;
    let graph = ConnectivityGraph::build(&config.coupling, &config.bx)
        .map_err(AnalysisError::NotUnidirectional)?;
    let distances = graph.boundary_distances();

    let with_bc = |value: S| {
        config.clone().with_bc(BoundaryCondition::frozen_uniform(
            &config.bx,
            Circle::new(value),
        ))
    };
    let base = lra_probe(&with_bc(v.clone()), opts)?;
    let moved = lra_probe(&with_bc(v.clone() + delta.clone()), opts)?;
    let delta_f = delta.to_f64();

    let mut order: Vec<(BoundaryDistance, Site)> =
        distances.iter().map(|(s, l)| (*l, *s)).collect();
    order.sort();
    let mut per_site_growth = Vec::new();
    let mut left_linear_region = Vec::new();
    for (l, site) in order {
        let (u, u2) = (base.limit_solution[&site], moved.limit_solution[&site]);
        if !region.contains(u) || !region.contains(u2) {
            left_linear_region.push(site);
            continue;
        }
        if delta_f != 0.0 {
            let d = circle_dist(&Circle::new(u), &Circle::new(u2));
            per_site_growth.push(SiteGrowth {
                site,
                l,
                ratio: d / delta_f.abs(),
            });
        }
    }
    let simulated_ratio = per_site_growth
        .iter()
        .find(|g| g.l == BoundaryDistance::Finite(1))
        .map(|g| g.ratio);
    Ok(SensitivityReport {
        analytic_ratio,
        simulated_ratio,
        per_site_growth,
        left_linear_region,
        v: v.to_f64(),
        delta: delta_f,
        c,
        converged: base.converged && moved.converged,
        seed: opts.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeBcReport {
    pub mutual_convergence: bool,
    pub final_mutual_distance: f64,
    /// Largest distance between run 0's final state and its states over the
    /// last `variation_window` steps: positive for a time-dependent limit.
    pub temporal_variation: f64,
    pub variation_window: usize,
    pub seed: u64,
    pub n_initials: usize,
    pub t_max: usize,
    pub tol: f64,
    #[serde(skip)]
    pub max_distances: Vec<f64>,
}

/// Mutual convergence of random initial data under free boundary conditions.
pub fn free_bc_probe<S: Scalar>(
    config: &EngineConfig<S>,
    opts: &ProbeOptions,
) -> Result<FreeBcReport, AnalysisError> {
    if !matches!(config.bc, BoundaryCondition::Free(_)) {
        return Err(AnalysisError::Precondition(
            "free boundary conditions required".into(),
        ));
    }
    if opts.n_initials < 2 {
        return Err(AnalysisError::Precondition(
            "n_initials must be at least 2".into(),
        ));
    }
    check_hypotheses(config, opts.override_condition)?;
    let engine = config.build()?;
    let window = opts.t_max.min(50);
    let ens = Ensemble::run(&engine, opts.n_initials, opts.t_max - window, opts.seed);
    let mut states = ens.states;
    let mut max_distances: Vec<f64> = ens.per_site.iter().map(|r| row_max(r)).collect();
    let mut recent = vec![states[0].clone()];
    for _ in 0..window {
        states.par_iter_mut().for_each(|s| *s = engine.step(s));
        recent.push(states[0].clone());
        max_distances.push(row_max(&pairwise_site_max(&states)));
    }
    let last = recent.last().unwrap();
    let temporal_variation = recent
        .iter()
        .map(|s| s.interior_sup_distance(last).to_f64())
        .fold(0.0, f64::max);
    let final_mutual_distance = *max_distances.last().unwrap();
    Ok(FreeBcReport {
        mutual_convergence: final_mutual_distance <= opts.tol,
        final_mutual_distance,
        temporal_variation,
        variation_window: window,
        seed: opts.seed,
        n_initials: opts.n_initials,
        t_max: opts.t_max,
        tol: opts.tol,
        max_distances,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicReport {
    pub min_separation: f64,
    /// Largest spread of values across sites in any state of either run.
    pub max_spatial_variation: f64,
    pub xi: f64,
    pub eta: f64,
    pub t_max: usize,
}

/// Runs the periodic engine from the constant states `xi` and `eta`, which
/// must return to themselves after `periods.0` and `periods.1` map steps.
pub fn periodic_nonuniqueness_demo<S: Scalar>(
    config: &EngineConfig<S>,
    xi: Circle<S>,
    eta: Circle<S>,
    periods: (usize, usize),
    t_max: usize,
) -> Result<PeriodicReport, AnalysisError> {
    if config.bc != BoundaryCondition::Periodic {
        return Err(AnalysisError::Precondition(
            "periodic boundary conditions required".into(),
        ));
    }
    for (p, period) in [(&xi, periods.0), (&eta, periods.1)] {
        if period == 0 || !config.map.returns_after(p, period, 1e-12) {
            return Err(AnalysisError::NotPeriodicPoint(p.to_f64()));
        }
    }
    let engine = config.build()?;
    let mut a = engine.state_with_interior(|_| xi.clone());
    let mut b = engine.state_with_interior(|_| eta.clone());
    let mut min_separation = f64::INFINITY;
    let mut max_spatial_variation = 0.0f64;
    for t in 0..=t_max {
        if t > 0 {
            a = engine.step(&a);
            b = engine.step(&b);
        }
        min_separation = min_separation.min(a.interior_sup_distance(&b).to_f64());
        max_spatial_variation = max_spatial_variation
            .max(spatial_variation(&a))
            .max(spatial_variation(&b));
    }
    Ok(PeriodicReport {
        min_separation,
        max_spatial_variation,
        xi: xi.to_f64(),
        eta: eta.to_f64(),
        t_max,
    })
}

fn spatial_variation<S: Scalar>(state: &LatticeState<S>) -> f64 {
    let values = state.interior_values();
    values
        .iter()
        .map(|x| circle_dist(x, &values[0]).to_f64())
        .fold(0.0, f64::max)
}
