//! Randomly perturbed dynamics: uniform arc noise of amplitude `ε` between the
//! local maps and the interaction, Monte Carlo estimates of invariant-measure
//! marginals and their spreads.
//!
//! Random numbers come from ChaCha8 streams: trajectory `m` draws its initial
//! state from stream `2m` and its noise from stream `2m + 1`, one `u64` per
//! interior site per step in layout order. Results are therefore independent
//! of how trajectories are scheduled across threads.

mod spread;
mod wasserstein;

use std::collections::BTreeMap;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use spread::{histogram, longest_run, spearman, spread_lower, spread_upper, MIN_BINS};
pub use wasserstein::w1_circle;

use crate::analysis::{least_squares_slope, random_point};
use crate::circle::Circle;
use crate::engine::{BoundaryCondition, Engine, EngineConfig, EngineError};
use crate::lattice::{LatticeState, Site};
use crate::scalar::Scalar;
use crate::topology::{BoundaryDistance, ConnectivityGraph, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("no samples")]
    EmptySamples,
    #[error("need at least {MIN_BINS} bins, got {0}")]
    TooFewBins(usize),
    #[error("amplitude must lie in [0, 1/4], got {0}")]
    InvalidAmplitude(f64),
    #[error(
        "empty sampling window (burn_in {burn_in}, horizon {horizon}, {trajectories} trajectories)"
    )]
    InsufficientSamples {
        burn_in: usize,
        horizon: usize,
        trajectories: usize,
    },
    #[error("expansion condition fails: a λ_T = {a_lambda} (needs < 1), (a + b) λ_T = {ab_lambda} (needs >= 1)")]
    ExpansionConditionViolated { a_lambda: f64, ab_lambda: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Noise uniform on the closed arc of radius `epsilon`; translation invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    /// Radius of the guaranteed support ball in units of `epsilon`.
    pub lambda_q: f64,
}

impl PerturbationSpec {
    pub fn uniform_arc(epsilon: f64) -> Result<Self, StochasticError> {
        if !(0.0..=0.25).contains(&epsilon) {
            return Err(StochasticError::InvalidAmplitude(epsilon));
        }
        Ok(PerturbationSpec {
            epsilon,
            lambda_q: 1.0,
        })
    }

    /// Displacement in `[-ε, ε]` from one `u64`.
    pub fn offset(&self, draw: u64) -> f64 {
        // 53 random bits onto [0, 1], inclusive at both ends
        let u = (draw >> 11) as f64 / ((1u64 << 53) - 1) as f64;
        self.epsilon * (2.0 * u - 1.0)
    }
}

/// One noisy copy of `x`; consumes exactly one `u64`.
pub fn sample_perturbation<S: Scalar>(
    spec: &PerturbationSpec,
    x: &Circle<S>,
    rng: &mut impl RngCore,
) -> Circle<S> {
    let draw = rng.next_u64();
    if spec.epsilon == 0.0 {
        return x.clone();
    }
    x.shifted(&S::from_f64(spec.offset(draw)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig<S> {
    pub engine: EngineConfig<S>,
    pub perturbation: PerturbationSpec,
    pub n_trajectories: usize,
    pub burn_in: usize,
    pub horizon: usize,
    pub seed: u64,
    pub bins: usize,
}

impl<S: Scalar> EnsembleConfig<S> {
    fn checked_engine(&self) -> Result<Engine<S>, StochasticError> {
        if !matches!(self.engine.bc, BoundaryCondition::Frozen(_)) {
            return Err(StochasticError::Precondition(
                "frozen boundary conditions required".into(),
            ));
        }
        if self.bins < MIN_BINS {
            return Err(StochasticError::TooFewBins(self.bins));
        }
        Ok(self.engine.build()?)
    }
}

/// Map, then independent noise at every interior site, then interaction.
/// Shell values are frozen and noise-free.
pub fn perturbed_step<S: Scalar>(
    engine: &Engine<S>,
    spec: &PerturbationSpec,
    state: &LatticeState<S>,
    rng: &mut impl RngCore,
) -> LatticeState<S> {
    let mut out = state.clone();
    engine.step_perturbed(state, &mut out, |x| *x = sample_perturbation(spec, x, rng));
    out
}

fn streams(seed: u64, trajectory: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(2 * trajectory as u64);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(2 * trajectory as u64 + 1);
    (init, noise)
}

/// Pooled post-burn-in samples per interior site.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSamples {
    pub sites: Vec<Site>,
    /// `[site][sample]`, trajectories in order, times in order within each.
    pub samples: Vec<Vec<f64>>,
    pub histograms: Vec<Vec<u64>>,
    pub bins: usize,
}

/// Runs `n_trajectories` independent noisy trajectories from uniform random
/// interiors and pools the values at every step `t` with `burn_in < t <= horizon`.
pub fn run_ensemble<S: Scalar>(
    config: &EnsembleConfig<S>,
) -> Result<EnsembleSamples, StochasticError> {
    let engine = config.checked_engine()?;
    if config.horizon <= config.burn_in || config.n_trajectories == 0 {
        return Err(StochasticError::InsufficientSamples {
            burn_in: config.burn_in,
            horizon: config.horizon,
            trajectories: config.n_trajectories,
        });
    }
    let n = engine.layout().n_interior();
    let per_trajectory: Vec<Vec<Vec<f64>>> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|m| {
            let (mut init, mut noise) = streams(config.seed, m);
            let mut state = engine.state_with_interior(|_| random_point(&mut init));
            let mut next = state.clone();
            let mut out = vec![Vec::with_capacity(config.horizon - config.burn_in); n];
            for t in 1..=config.horizon {
                engine.step_perturbed(&state, &mut next, |x| {
                    *x = sample_perturbation(&config.perturbation, x, &mut noise)
                });
                std::mem::swap(&mut state, &mut next);
                if t > config.burn_in {
                    for (k, x) in state.interior_values().iter().enumerate() {
                        out[k].push(x.to_f64());
                    }
                }
            }
            out
        })
        .collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n];
    for traj in per_trajectory {
        for (k, v) in traj.into_iter().enumerate() {
            samples[k].extend(v);
        }
    }
    let histograms = samples.iter().map(|s| histogram(s, config.bins)).collect();
    Ok(EnsembleSamples {
        sites: engine.layout().interior().to_vec(),
        samples,
        histograms,
        bins: config.bins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteSpread {
    pub site: Site,
    #[serde(rename = "L")]
    pub l: BoundaryDistance,
    pub s_plus: f64,
    /// Bin-run estimate, capped at `s_plus` so that `s_minus <= s_plus`.
    pub s_minus: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadReport {
    /// Ordered by boundary distance, then site.
    pub per_site: Vec<SiteSpread>,
    /// Least-squares slope of `s_minus` against `L` (finite `L` only).
    pub fitted_slope: f64,
    /// Spearman correlation of `(L, s_minus)`.
    pub correlation: f64,
    /// `fitted_slope / ε`; `None` for `ε = 0`.
    pub gamma_hat: Option<f64>,
    pub slope_positive: bool,
    pub a: f64,
    pub b: f64,
    pub lambda_lower: f64,
    pub epsilon: f64,
    pub n_trajectories: usize,
    pub burn_in: usize,
    pub horizon: usize,
    pub bins: usize,
    pub seed: u64,
}

impl SpreadReport {
    /// CSV `site,L,s_plus,s_minus,count`.
    pub fn to_csv(&self) -> String {
        let rows = self.per_site.iter().map(|s| {
            [
                s.site.to_string(),
                s.l.to_string(),
                s.s_plus.to_string(),
                s.s_minus.to_string(),
                s.count.to_string(),
            ]
        });
        crate::table::csv(["site", "L", "s_plus", "s_minus", "count"], rows)
    }

    pub fn mean_s_minus(&self) -> f64 {
        self.per_site.iter().map(|s| s.s_minus).sum::<f64>() / self.per_site.len() as f64
    }
}

/// Spreads of the noisy invariant marginals against boundary distance.
///
/// Requires `a λ_T < 1 <= (a + b) λ_T` for the coupling's `(a, b)` unless
/// `allow_violation` is set (negative controls).
pub fn instability_experiment<S: Scalar>(
    config: &EnsembleConfig<S>,
    allow_violation: bool,
) -> Result<SpreadReport, StochasticError> {
    let (a, b) = config.engine.coupling.spread_coefficients();
    let (a, b) = (a.to_f64(), b.to_f64());
    let lambda_lower = config.engine.map.lambda_lower.to_f64();
    let (a_lambda, ab_lambda) = (a * lambda_lower, (a + b) * lambda_lower);
    if !(a_lambda < 1.0 && ab_lambda >= 1.0) && !allow_violation {
        return Err(StochasticError::ExpansionConditionViolated {
            a_lambda,
            ab_lambda,
        });
    }
    let graph = ConnectivityGraph::build(&config.engine.coupling, &config.engine.bx)?;
    let distances = graph.boundary_distances();
    let ensemble = run_ensemble(config)?;

    let mut per_site: Vec<SiteSpread> = Vec::new();
    for (k, site) in ensemble.sites.iter().enumerate() {
        let samples = &ensemble.samples[k];
        let s_plus = spread_upper(samples)?;
        let s_minus = spread_lower(samples, config.bins)?.min(s_plus);
        per_site.push(SiteSpread {
            site: *site,
            l: distances[site],
            s_plus,
            s_minus,
            count: samples.len(),
        });
    }
    per_site.sort_by(|x, y| (x.l, x.site).cmp(&(y.l, y.site)));

    let finite: Vec<(f64, f64)> = per_site
        .iter()
        .filter_map(|s| s.l.finite().map(|l| (l as f64, s.s_minus)))
        .collect();
    let fitted_slope = least_squares_slope(&finite);
    let ls: Vec<f64> = finite.iter().map(|p| p.0).collect();
    let ss: Vec<f64> = finite.iter().map(|p| p.1).collect();
    let eps = config.perturbation.epsilon;
    Ok(SpreadReport {
        correlation: spearman(&ls, &ss),
        gamma_hat: (eps > 0.0).then(|| fitted_slope / eps),
        slope_positive: fitted_slope > 0.0,
        fitted_slope,
        per_site,
        a,
        b,
        lambda_lower,
        epsilon: eps,
        n_trajectories: config.n_trajectories,
        burn_in: config.burn_in,
        horizon: config.horizon,
        bins: config.bins,
        seed: config.seed,
    })
}

/// Distances below this count as the noise floor in the contraction diagnostic.
pub const CONTRACTION_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub site: Site,
    /// `W1` between the two ensembles' marginals at `site`, per step.
    pub distances: Vec<f64>,
    /// `distances[t + 1] / distances[t]` while `distances[t]` is above the floor.
    pub empirical_factors: Vec<f64>,
    pub geometric_mean: f64,
    pub bound: f64,
    pub slack: f64,
    pub within_bound: bool,
    pub initial_shift: f64,
    pub seed: u64,
}

/// Evolves two ensembles that differ only in the initial values at `site`
/// (shifted by `initial_shift`) and share every noise draw, and records the
/// per-step contraction of the Wasserstein distance between their marginals
/// at `site`, for up to `horizon` steps.
pub fn contraction_diagnostic<S: Scalar>(
    config: &EnsembleConfig<S>,
    site: &Site,
    initial_shift: f64,
    slack: f64,
) -> Result<ContractionReport, StochasticError> {
    let engine = config.checked_engine()?;
    let graph = ConnectivityGraph::build(&config.engine.coupling, &config.engine.bx)?;
    if !graph.upstream_set(site)?.is_empty() {
        return Err(StochasticError::Precondition(format!(
            "site {site} has interior inputs; its only inputs must be frozen shell values"
        )));
    }
    if config.n_trajectories == 0 {
        return Err(StochasticError::InsufficientSamples {
            burn_in: 0,
            horizon: config.horizon,
            trajectories: 0,
        });
    }
    let slot = engine.layout().index_of(site).unwrap();
    let shift = S::from_f64(initial_shift);
    let paths: Vec<Vec<(f64, f64)>> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|m| {
            let (mut init, noise) = streams(config.seed, m);
            let mut a = engine.state_with_interior(|_| random_point(&mut init));
            let mut b = a.clone();
            let moved = b.values()[slot].shifted(&shift);
            b.set(site, moved).unwrap();
            let (mut noise_a, mut noise_b) = (noise.clone(), noise);
            let mut out = vec![(a.values()[slot].to_f64(), b.values()[slot].to_f64())];
            for _ in 0..config.horizon {
                a = perturbed_step(&engine, &config.perturbation, &a, &mut noise_a);
                b = perturbed_step(&engine, &config.perturbation, &b, &mut noise_b);
                out.push((a.values()[slot].to_f64(), b.values()[slot].to_f64()));
            }
            out
        })
        .collect();

    let mut distances = Vec::with_capacity(config.horizon + 1);
    for t in 0..=config.horizon {
        let xs: Vec<f64> = paths.iter().map(|p| p[t].0).collect();
        let ys: Vec<f64> = paths.iter().map(|p| p[t].1).collect();
        let d = w1_circle(&xs, &ys)?;
        distances.push(d);
        if d <= CONTRACTION_FLOOR {
            break;
        }
    }
    let empirical_factors: Vec<f64> = distances
        .windows(2)
        .filter(|w| w[0] > CONTRACTION_FLOOR)
        .map(|w| w[1] / w[0])
        .collect();
    let geometric_mean = if empirical_factors.is_empty() {
        0.0
    } else {
        // product telescopes; guard against an exact zero at the floor
        let logs: Vec<f64> = empirical_factors
            .iter()
            .map(|f| f.max(f64::MIN_POSITIVE).ln())
            .collect();
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    };
    let check = config
        .engine
        .coupling
        .check_lra_condition(&config.engine.map);
    Ok(ContractionReport {
        site: *site,
        distances,
        geometric_mean,
        bound: check.lambda_product,
        slack,
        within_bound: geometric_mean <= check.lambda_product + slack,
        empirical_factors,
        initial_shift,
        seed: config.seed,
    })
}

/// Per-site samples as a map, for reports.
pub fn sample_counts(samples: &EnsembleSamples) -> BTreeMap<Site, usize> {
    samples
        .sites
        .iter()
        .zip(&samples.samples)
        .map(|(s, v)| (*s, v.len()))
        .collect()
}
