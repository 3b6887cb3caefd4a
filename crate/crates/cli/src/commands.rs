//! One runner per subcommand. Each writes `report.json` (the probe's report
//! together with the resolved configuration and seed) plus CSV sidecars, and
//! says whether the probe's headline assertion held.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lra_core::analysis::{
    free_bc_probe, lra_probe, periodic_nonuniqueness_demo, random_initial, sensitivity_experiment,
    AnalysisError, LinearRegion, ProbeOptions,
};
use lra_core::stochastic::{
    contraction_diagnostic, instability_experiment, EnsembleConfig, PerturbationSpec,
    StochasticError,
};
use lra_core::table::csv;
use lra_core::{
    BigRational, BoundaryCondition, Circle, ConnectivityGraph, EngineConfig, Scalar, Site,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    ConfigError, Experiment, ExperimentConfig, FreeBcParams, LraParams, PeriodicParams, ScalarKind,
    SensitivityParams, SimulateParams, StochasticParams,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 1,
            RunError::Precondition(_) => 4,
        }
    }
}

impl From<AnalysisError> for RunError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Engine(e) => RunError::Config(ConfigError::Invalid {
                key: "bc".into(),
                message: e.to_string(),
            }),
            other => RunError::Precondition(other.to_string()),
        }
    }
}

impl From<StochasticError> for RunError {
    fn from(e: StochasticError) -> Self {
        let config = |key: &str, e: StochasticError| {
            RunError::Config(ConfigError::Invalid {
                key: key.into(),
                message: e.to_string(),
            })
        };
        match e {
            StochasticError::TooFewBins(_) => config("experiment.bins", e),
            StochasticError::InvalidAmplitude(_) => config("experiment.epsilon", e),
            StochasticError::InsufficientSamples { .. } | StochasticError::EmptySamples => {
                config("experiment.horizon", e)
            }
            StochasticError::Engine(_) => config("bc", e),
            other => RunError::Precondition(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    /// check-topology found a cycle.
    Cycle,
    AssertionFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::Cycle => 2,
            Status::AssertionFailed => 3,
        }
    }
}

/// What a finished command reports back.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Report files, written in order once the probe has finished.
struct Output {
    command: &'static str,
    files: Vec<(&'static str, String)>,
}

impl Output {
    fn new(command: &'static str) -> Self {
        Output {
            command,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    fn report<R: Serialize>(
        &mut self,
        config: &ExperimentConfig,
        passed: bool,
        summary: &str,
        report: R,
    ) {
        #[derive(Serialize)]
        struct Envelope<'a, R> {
            command: &'a str,
            passed: bool,
            summary: &'a str,
            seed: u64,
            config: &'a ExperimentConfig,
            report: R,
        }
        let envelope = Envelope {
            command: self.command,
            passed,
            summary,
            seed: config.seed,
            config,
            report,
        };
        let mut text = serde_json::to_string_pretty(&envelope).expect("reports serialize");
        text.push('\n');
        self.files.insert(0, ("report.json", text));
    }

    fn write(self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        let fail = |path: &Path, e: std::io::Error| RunError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| fail(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs `command` on `config`. `check-topology` accepts any experiment; every
/// other command must match `experiment.command`.
pub fn run(command: &str, config: &ExperimentConfig, out: &Path) -> Result<Outcome, RunError> {
    if command != "check-topology" && command != config.experiment.command() {
        return Err(ConfigError::Invalid {
            key: "experiment.command".into(),
            message: format!(
                "config selects {:?}, not {command:?}",
                config.experiment.command()
            ),
        }
        .into());
    }
    match config.scalar {
        ScalarKind::F64 => run_with::<f64>(command, config, out),
        ScalarKind::Rational => run_with::<BigRational>(command, config, out),
    }
}

fn run_with<S: Scalar>(
    command: &str,
    config: &ExperimentConfig,
    out: &Path,
) -> Result<Outcome, RunError> {
    let engine = config.engine_config::<S>()?;
    let mut output = Output::new(if command == "check-topology" {
        "check-topology"
    } else {
        config.experiment.command()
    });
    let (status, summary) = match (command, &config.experiment) {
        ("check-topology", _) => check_topology(config, &engine, &mut output)?,
        (_, Experiment::Simulate(p)) => simulate(config, &engine, p, &mut output)?,
        (_, Experiment::Lra(p)) => lra(config, &engine, p, &mut output)?,
        (_, Experiment::Sensitivity(p)) => sensitivity(config, &engine, p, &mut output)?,
        (_, Experiment::FreeBc(p)) => free_bc(config, &engine, p, &mut output)?,
        (_, Experiment::Periodic(p)) => periodic(config, &engine, p, &mut output)?,
        (_, Experiment::Stochastic(p)) => stochastic(config, &engine, p, &mut output)?,
        (_, Experiment::CheckTopology(_)) => unreachable!("command matched against the config"),
    };
    let files = output.write(out)?;
    Ok(Outcome {
        status,
        summary,
        files,
    })
}

/// Resolved probe parameters next to the probe's own report fields.
#[derive(Serialize)]
struct Probe<'a, P, R> {
    parameters: &'a P,
    #[serde(flatten)]
    result: &'a R,
}

fn verdict(passed: bool) -> Status {
    if passed {
        Status::Passed
    } else {
        Status::AssertionFailed
    }
}

fn check_topology<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    #[derive(Serialize)]
    struct TopologyReport {
        unidirectional: bool,
        interior_sites: usize,
        shell_sites: usize,
        edges: usize,
        max_degree: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        cycle_witness: Option<Vec<Site>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        valid_enumeration: Option<bool>,
        #[serde(skip_serializing_if = "Option::is_none")]
        labels: Option<BTreeMap<Site, u64>>,
    }
    let graph = ConnectivityGraph::build(&engine.coupling, &engine.bx).map_err(|e| {
        ConfigError::Invalid {
            key: "coupling".into(),
            message: e.to_string(),
        }
    })?;
    let mut report = TopologyReport {
        unidirectional: false,
        interior_sites: graph.interior().len(),
        shell_sites: graph.boundary().len(),
        edges: graph.edge_count(),
        max_degree: graph.max_degree(),
        cycle_witness: None,
        valid_enumeration: None,
        labels: None,
    };
    output.add("adjacency.txt", graph.adjacency_text());
    if let Some(cycle) = graph.detect_cycle() {
        let mut path: Vec<String> = cycle.iter().map(Site::to_string).collect();
        path.push(cycle[0].to_string());
        let summary = format!("cycle: {}", path.join(" -> "));
        report.cycle_witness = Some(cycle);
        output.report(config, false, &summary, report);
        return Ok((Status::Cycle, summary));
    }
    let enumeration = graph
        .enumerate()
        .map_err(|e| RunError::Precondition(e.to_string()))?;
    let valid = graph.validate_enumeration(&enumeration);
    let table = graph.enumeration_csv(&enumeration);
    let summary = format!(
        "unidirectional: {} interior sites labelled, enumeration {}\n{}",
        graph.interior().len(),
        if valid { "valid" } else { "INVALID" },
        table.trim_end()
    );
    report.unidirectional = true;
    report.valid_enumeration = Some(valid);
    report.labels = Some(enumeration.labels.clone());
    output.add("enumeration.csv", table);
    output.report(config, valid, &summary, report);
    Ok((verdict(valid), summary))
}

fn simulate<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &SimulateParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    #[derive(Serialize)]
    struct SimulateReport<'a> {
        parameters: &'a SimulateParams,
        rows: usize,
        ordered_by_enumeration: bool,
        final_state: BTreeMap<Site, f64>,
    }
    let built = engine.build().map_err(|e| ConfigError::Invalid {
        key: "bc".into(),
        message: e.to_string(),
    })?;
    let initial = match &p.initial_value {
        Some(v) => {
            let v = Circle::new(v.to_scalar::<S>("experiment.initial_value")?);
            built.state_with_interior(|_| v.clone())
        }
        None => random_initial(&built, config.seed, 0),
    };
    let states = built.trajectory(initial, p.t_max);
    let enumeration = ConnectivityGraph::build(&engine.coupling, &engine.bx)
        .ok()
        .and_then(|g| g.enumerate().ok());
    output.add(
        "trajectory.csv",
        built.trajectory_csv(&states, enumeration.as_ref()),
    );
    let last = states
        .last()
        .expect("trajectory includes the initial state");
    let final_state = last
        .layout()
        .interior()
        .iter()
        .zip(last.interior_values())
        .map(|(s, x)| (*s, x.to_f64()))
        .collect();
    let summary = format!(
        "{} states of {} interior sites",
        states.len(),
        last.layout().n_interior()
    );
    let report = SimulateReport {
        parameters: p,
        rows: states.len(),
        ordered_by_enumeration: enumeration.is_some(),
        final_state,
    };
    output.report(config, true, &summary, report);
    Ok((Status::Passed, summary))
}

/// CSV `t,<name>` for a per-step series.
fn series(name: &str, values: &[f64]) -> String {
    let rows = values
        .iter()
        .enumerate()
        .map(|(t, d)| [t.to_string(), d.to_string()]);
    csv(["t", name], rows)
}

fn site_values_csv(values: &BTreeMap<Site, f64>) -> String {
    let rows = values.iter().map(|(s, v)| [s.to_string(), v.to_string()]);
    csv(["site", "value"], rows)
}

fn lra<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &LraParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    let opts = ProbeOptions {
        n_initials: p.n_initials,
        t_max: p.t_max,
        tol: p.tol,
        seed: config.seed,
        override_condition: p.override_condition,
    };
    let report = lra_probe(engine, &opts)?;
    let rate_ok = match (p.max_rate, report.fitted_rate) {
        (None, _) => true,
        (Some(bound), Some(rate)) => rate <= bound,
        (Some(_), None) => false,
    };
    let passed = report.converged && rate_ok;
    let rate = report
        .fitted_rate
        .map_or_else(|| "not fitted".to_string(), |r| format!("{r:.4}"));
    let summary =
        format!(
        "{}: max final distance {:.3e} (tol {:e}) after {} steps; fitted rate {rate} (bound {:.4})",
        if report.converged { "converged" } else { "not converged" },
        report.max_final_distance,
        p.tol,
        p.t_max,
        report.rate_bound,
    );
    output.add("distances.csv", report.distances_csv());
    output.add("limit.csv", site_values_csv(&report.limit_solution));
    output.report(
        config,
        passed,
        &summary,
        Probe {
            parameters: p,
            result: &report,
        },
    );
    Ok((verdict(passed), summary))
}

fn sensitivity<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &SensitivityParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    if !matches!(engine.bc, BoundaryCondition::Frozen(_)) {
        return Err(RunError::Precondition(
            "sensitivity needs frozen boundary conditions".into(),
        ));
    }
    let region = LinearRegion {
        lo: p.region_lo,
        hi: p.region_hi,
        slope: p.region_slope,
    };
    let opts = ProbeOptions {
        n_initials: p.n_initials,
        t_max: p.t_max,
        tol: p.tol,
        seed: config.seed,
        override_condition: false,
    };
    let v = p.v.to_scalar::<S>("experiment.v")?;
    let delta = p.delta.to_scalar::<S>("experiment.delta")?;
    let report = sensitivity_experiment(engine, &region, v, delta, &opts)?;
    let first_ok = report.simulated_ratio.is_some_and(|r| {
        ((r - report.analytic_ratio) / report.analytic_ratio).abs() <= p.sensitivity_tol
    });
    let mut growth_ok = true;
    for l in 1..=p.growth_max_l {
        let expected = report.analytic_ratio.powi(l as i32);
        let at_l: Vec<_> = report
            .per_site_growth
            .iter()
            .filter(|g| g.l.finite() == Some(l))
            .collect();
        growth_ok &= !at_l.is_empty();
        for g in at_l {
            growth_ok &= ((g.ratio - expected) / expected).abs() <= p.growth_tol;
        }
    }
    let growth = csv(
        ["site", "L", "ratio", "expected"],
        report.per_site_growth.iter().map(|g| {
            let expected =
                g.l.finite()
                    .map_or(f64::NAN, |l| report.analytic_ratio.powi(l as i32));
            [
                g.site.to_string(),
                g.l.to_string(),
                g.ratio.to_string(),
                expected.to_string(),
            ]
        }),
    );
    let passed = report.converged && first_ok && growth_ok;
    let summary = format!(
        "first-site amplification {} vs analytic {:.6} (rel tol {:e}); growth up to L={} {}",
        report
            .simulated_ratio
            .map_or_else(|| "n/a".into(), |r| format!("{r:.6}")),
        report.analytic_ratio,
        p.sensitivity_tol,
        p.growth_max_l,
        if growth_ok {
            "matches"
        } else {
            "does not match"
        },
    );
    output.add("growth.csv", growth);
    output.report(
        config,
        passed,
        &summary,
        Probe {
            parameters: p,
            result: &report,
        },
    );
    Ok((verdict(passed), summary))
}

fn free_bc<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &FreeBcParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    let opts = ProbeOptions {
        n_initials: p.n_initials,
        t_max: p.t_max,
        tol: p.tol,
        seed: config.seed,
        override_condition: p.override_condition,
    };
    let report = free_bc_probe(engine, &opts)?;
    let passed = report.mutual_convergence && report.temporal_variation > p.min_variation;
    let summary = format!(
        "mutual distance {:.3e} (tol {:e}); temporal variation {:.4} over the last {} steps (needs > {:e})",
        report.final_mutual_distance, p.tol, report.temporal_variation, report.variation_window, p.min_variation,
    );
    output.add("distances.csv", series("max", &report.max_distances));
    output.report(
        config,
        passed,
        &summary,
        Probe {
            parameters: p,
            result: &report,
        },
    );
    Ok((verdict(passed), summary))
}

fn periodic<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &PeriodicParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    let xi = Circle::new(p.xi.to_scalar::<S>("experiment.xi")?);
    let eta = Circle::new(p.eta.to_scalar::<S>("experiment.eta")?);
    let required = match &p.min_separation {
        Some(m) => m.to_f64("experiment.min_separation")?,
        None => 0.0,
    };
    let report =
        periodic_nonuniqueness_demo(engine, xi, eta, (p.periods[0], p.periods[1]), p.t_max)?;
    let separated =
        report.min_separation > 0.0 && report.min_separation >= required - p.separation_slack;
    let passed = separated && report.max_spatial_variation <= p.variation_tol;
    let summary = format!(
        "min separation {:.15} (needs >= {required} - {:e}); spatial variation {:.1e} (tol {:e}) over {} steps",
        report.min_separation, p.separation_slack, report.max_spatial_variation, p.variation_tol, p.t_max,
    );
    output.report(
        config,
        passed,
        &summary,
        Probe {
            parameters: p,
            result: &report,
        },
    );
    Ok((verdict(passed), summary))
}

fn stochastic<S: Scalar>(
    config: &ExperimentConfig,
    engine: &EngineConfig<S>,
    p: &StochasticParams,
    output: &mut Output,
) -> Result<(Status, String), RunError> {
    #[derive(Serialize)]
    struct StochasticReport<'a, C> {
        parameters: &'a StochasticParams,
        spread: C,
        #[serde(skip_serializing_if = "Option::is_none")]
        contraction: Option<lra_core::stochastic::ContractionReport>,
    }
    let ensemble = EnsembleConfig {
        engine: engine.clone(),
        perturbation: PerturbationSpec::uniform_arc(p.epsilon)?,
        n_trajectories: p.n_trajectories,
        burn_in: p.burn_in,
        horizon: p.horizon,
        seed: config.seed,
        bins: p.bins,
    };
    let spread = instability_experiment(&ensemble, p.allow_violation)?;
    let spread_ok = if p.epsilon > 0.0 {
        spread.slope_positive && spread.correlation >= p.min_correlation
    } else {
        // no noise: every marginal is a point mass, at most two cells wide
        spread
            .per_site
            .iter()
            .all(|s| s.s_minus <= 1.0 / p.bins as f64)
    };
    let mut summary = if p.epsilon > 0.0 {
        format!(
            "s_minus vs L: rank correlation {:.3} (needs >= {}), slope {:.5}",
            spread.correlation, p.min_correlation, spread.fitted_slope
        )
    } else {
        format!(
            "noise-free control: max s_minus {:.2e} (needs <= 1/bins)",
            spread
                .per_site
                .iter()
                .map(|s| s.s_minus)
                .fold(0.0, f64::max)
        )
    };
    output.add("spread.csv", spread.to_csv());
    let mut passed = spread_ok;
    let contraction = match &p.contraction_site {
        Some(site) => {
            let diagnostic = EnsembleConfig {
                horizon: p.contraction_horizon,
                ..ensemble.clone()
            };
            let c = contraction_diagnostic(&diagnostic, site, p.initial_shift, p.slack)?;
            passed &= c.within_bound;
            write!(
                summary,
                "; contraction at {site}: geometric mean {:.4} (bound {:.4} + {})",
                c.geometric_mean, c.bound, c.slack
            )
            .unwrap();
            output.add("contraction.csv", series("w1", &c.distances));
            Some(c)
        }
        None => None,
    };
    let report = StochasticReport {
        parameters: p,
        spread: &spread,
        contraction,
    };
    output.report(config, passed, &summary, report);
    Ok((verdict(passed), summary))
}
