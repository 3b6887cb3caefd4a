//! Experiment configuration files (TOML).
//!
//! Every section rejects unknown keys, and keys that the selected `kind` does
//! not use are rejected too, so a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use lra_core::analysis::random_boundary;
use lra_core::lattice::rect_sites;
use lra_core::{
    chain_sites, BoundaryCondition, BoxSpec, Circle, Coupling, EngineConfig, LiftRule, LocalMap,
    Scalar, Site,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

/// A number written as an integer, a float, or a string such as `"1/3"`.
///
/// Decimal literals and fractions convert exactly when the scalar is rational,
/// so `0.2` means one fifth rather than its nearest double.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn to_scalar<S: Scalar>(&self, key: &str) -> Result<S, ConfigError> {
        let parsed = match self {
            Num::Int(i) => Some(S::from_i64(*i)),
            Num::Float(x) if x.is_finite() => {
                Some(decimal(&format!("{x:?}")).unwrap_or_else(|| S::from_f64(*x)))
            }
            Num::Float(_) => None,
            Num::Text(t) => parse_text(t),
        };
        parsed.ok_or_else(|| invalid(key, format!("cannot read {self} as a finite number")))
    }

    pub fn to_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.to_scalar::<f64>(key)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Int(i) => write!(f, "{i}"),
            Num::Float(x) => write!(f, "{x:?}"),
            Num::Text(t) => write!(f, "{t:?}"),
        }
    }
}

fn parse_text<S: Scalar>(t: &str) -> Option<S> {
    let t = t.trim();
    match t.split_once('/') {
        Some((p, q)) => {
            let (p, q): (i64, i64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            (q != 0).then(|| S::ratio(p, q))
        }
        None => decimal(t),
    }
}

/// Exact value of `[-]digits[.digits][e[-]digits]`, if it fits in `i64` parts.
fn decimal<S: Scalar>(t: &str) -> Option<S> {
    let (mantissa, exp) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: i64 = format!("{int}{frac}").parse().ok()?;
    let scale = exp.checked_sub(i32::try_from(frac.len()).ok()?)?;
    let value = if scale >= 0 {
        S::from_i64(digits.checked_mul(10i64.checked_pow(scale as u32)?)?)
    } else {
        S::ratio(digits, 10i64.checked_pow(scale.unsigned_abs())?)
    };
    Some(if negative { S::zero() - value } else { value })
}

fn nums<S: Scalar>(values: &[Num], key: &str) -> Result<Vec<S>, ConfigError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.to_scalar(&format!("{key}[{i}]")))
        .collect()
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
    value.as_ref().ok_or_else(|| invalid(key, "missing"))
}

/// Rejects keys that are set but unused by the section's `kind`.
fn only(
    section: &str,
    kind: &str,
    present: &[(&str, bool)],
    allowed: &[&str],
) -> Result<(), ConfigError> {
    for (name, set) in present {
        if *set && !allowed.contains(name) {
            return Err(invalid(
                format!("{section}.{name}"),
                format!("not used by {kind}"),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    #[default]
    F64,
    Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Arithmetic for the state: `f64` or exact `rational`.
    #[serde(default)]
    pub scalar: ScalarKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "box")]
    pub lattice: BoxSection,
    pub map: MapSection,
    pub coupling: CouplingSection,
    pub bc: BcSection,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "OutputSection::is_empty")]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxKind {
    /// Sites `1..=n`.
    Chain,
    /// Sites `x:y` with `0 <= x < width`, `0 <= y < height`.
    Rect,
    /// An explicit site list.
    Sites,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub kind: BoxKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Site>>,
    /// Boundary shell; by default every stencil input outside the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<Vec<Site>>,
}

impl BoxSection {
    fn sites(&self) -> Result<Vec<Site>, ConfigError> {
        let present = [
            ("n", self.n.is_some()),
            ("width", self.width.is_some()),
            ("height", self.height.is_some()),
            ("sites", self.sites.is_some()),
        ];
        let sites = match self.kind {
            BoxKind::Chain => {
                only("box", "chain", &present, &["n"])?;
                chain_sites(*required(&self.n, "box.n")?)
            }
            BoxKind::Rect => {
                only("box", "rect", &present, &["width", "height"])?;
                rect_sites(
                    *required(&self.width, "box.width")?,
                    *required(&self.height, "box.height")?,
                )
            }
            BoxKind::Sites => {
                only("box", "sites", &present, &["sites"])?;
                required(&self.sites, "box.sites")?.clone()
            }
        };
        if sites.is_empty() {
            return Err(invalid("box", "the box has no sites"));
        }
        Ok(sites)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapName {
    Doubling,
    Rotation,
    Affine,
    Piecewise,
    LinearNearFixedPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub kind: MapName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Num>,
    /// Fixed point of `linear_near_fixed_point`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<Num>,
    /// Declared constants; each defaults to the value implied by the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_lower: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_upper: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Num>,
}

impl MapSection {
    pub fn build<S: Scalar>(&self) -> Result<LocalMap<S>, ConfigError> {
        let present = [
            ("angle", self.angle.is_some()),
            ("slope", self.slope.is_some()),
            ("offset", self.offset.is_some()),
            ("breakpoints", self.breakpoints.is_some()),
            ("slopes", self.slopes.is_some()),
            ("start", self.start.is_some()),
            ("v", self.v.is_some()),
            ("arc", self.arc.is_some()),
        ];
        let num = |v: &Option<Num>, key: &str| required(v, key)?.to_scalar::<S>(key);
        let map = match self.kind {
            MapName::Doubling => {
                only("map", "doubling", &present, &[])?;
                LocalMap::doubling()
            }
            MapName::Rotation => {
                only("map", "rotation", &present, &["angle"])?;
                LocalMap::rotation(num(&self.angle, "map.angle")?)
            }
            MapName::Affine => {
                only("map", "affine", &present, &["slope", "offset"])?;
                LocalMap::affine(
                    num(&self.slope, "map.slope")?,
                    num(&self.offset, "map.offset")?,
                )
            }
            MapName::Piecewise => {
                only(
                    "map",
                    "piecewise",
                    &present,
                    &["breakpoints", "slopes", "start"],
                )?;
                LocalMap::piecewise(
                    nums(
                        required(&self.breakpoints, "map.breakpoints")?,
                        "map.breakpoints",
                    )?,
                    nums(required(&self.slopes, "map.slopes")?, "map.slopes")?,
                    num(&self.start, "map.start")?,
                )
                .map_err(|e| invalid("map", e))?
            }
            MapName::LinearNearFixedPoint => {
                only(
                    "map",
                    "linear_near_fixed_point",
                    &present,
                    &["v", "slope", "arc"],
                )?;
                LocalMap::linear_near_fixed_point(
                    num(&self.v, "map.v")?,
                    num(&self.slope, "map.slope")?,
                    num(&self.arc, "map.arc")?,
                )
                .map_err(|e| invalid("map", e))?
            }
        };
        let constant = |v: &Option<Num>, key: &str, default: &S| match v {
            Some(v) => v.to_scalar::<S>(key),
            None => Ok(default.clone()),
        };
        let lower = constant(&self.lambda_lower, "map.lambda_lower", &map.lambda_lower)?;
        let upper = constant(&self.lambda_upper, "map.lambda_upper", &map.lambda_upper)?;
        let sigma = constant(&self.sigma, "map.sigma", &map.sigma)?;
        let map = map.with_constants(lower, upper, sigma);
        map.validate().map_err(|e| invalid("map", e))?;
        Ok(map)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingName {
    Diffusive,
    Unidirectional,
    UnidirectionalK,
    ToomNe,
    TranslationInvariant,
    Table,
}

/// One row of an explicit stencil table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilRow {
    pub inputs: Vec<Site>,
    pub weights: Vec<Num>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub kind: CouplingName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Num>,
    /// `unidirectional_k`: self then upstream neighbours; `toom_ne`: self,
    /// east, north; `translation_invariant`: one per offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Site>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stencils: Option<BTreeMap<Site, StencilRow>>,
    /// Overrides the constructor's default lift rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftRule>,
    /// Rejects stencil inputs farther than this from their site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<u64>,
}

impl CouplingSection {
    pub fn build<S: Scalar>(&self, sites: &[Site]) -> Result<Coupling<S>, ConfigError> {
        let present = [
            ("c", self.c.is_some()),
            ("weights", self.weights.is_some()),
            ("offsets", self.offsets.is_some()),
            ("stencils", self.stencils.is_some()),
        ];
        let c = || required(&self.c, "coupling.c")?.to_scalar::<S>("coupling.c");
        let weights = || {
            nums::<S>(
                required(&self.weights, "coupling.weights")?,
                "coupling.weights",
            )
        };
        let lift = self.lift.unwrap_or(LiftRule::UpstreamFolded);
        let built = match self.kind {
            CouplingName::Diffusive => {
                only("coupling", "diffusive", &present, &["c"])?;
                Coupling::diffusive(sites, c()?)
            }
            CouplingName::Unidirectional => {
                only("coupling", "unidirectional", &present, &["c"])?;
                Coupling::unidirectional(sites, c()?)
            }
            CouplingName::UnidirectionalK => {
                only("coupling", "unidirectional_k", &present, &["weights"])?;
                Coupling::unidirectional_k(sites, &weights()?)
            }
            CouplingName::ToomNe => {
                only("coupling", "toom_ne", &present, &["weights"])?;
                let w: [S; 3] = weights()?.try_into().map_err(|_| {
                    invalid(
                        "coupling.weights",
                        "toom_ne takes three weights: self, east, north",
                    )
                })?;
                Coupling::toom_ne(sites, w)
            }
            CouplingName::TranslationInvariant => {
                only(
                    "coupling",
                    "translation_invariant",
                    &present,
                    &["weights", "offsets"],
                )?;
                let offsets = required(&self.offsets, "coupling.offsets")?;
                let w = weights()?;
                if w.len() != offsets.len() {
                    return Err(invalid("coupling.weights", "needs one weight per offset"));
                }
                let pairs: Vec<(Site, S)> = offsets.iter().copied().zip(w).collect();
                Coupling::translation_invariant(sites, &pairs, lift)
            }
            CouplingName::Table => {
                only("coupling", "table", &present, &["stencils"])?;
                let mut table = BTreeMap::new();
                for (site, row) in required(&self.stencils, "coupling.stencils")? {
                    let key = format!("coupling.stencils.\"{site}\"");
                    if row.inputs.len() != row.weights.len() {
                        return Err(invalid(key, "needs one weight per input"));
                    }
                    let w = nums::<S>(&row.weights, &format!("{key}.weights"))?;
                    table.insert(*site, row.inputs.iter().copied().zip(w).collect());
                }
                Coupling::from_table(table, lift)
            }
        };
        let mut coupling = built.map_err(|e| invalid("coupling", e))?;
        if let Some(rule) = self.lift {
            coupling = coupling.with_lift(rule);
        }
        if let Some(r) = self.radius {
            coupling
                .check_short_range(r)
                .map_err(|e| invalid("coupling.radius", e))?;
        }
        Ok(coupling)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    Frozen,
    Free,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub mode: BcMode,
    /// The same value on every shell site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Num>,
    /// Independent uniform shell values drawn from the seed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub random: bool,
    /// Per-site values, applied on top of `value` or `random`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<Site, Num>>,
    /// Map only the interior; shell values enter the interaction unmapped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub premap: bool,
}

impl BcSection {
    fn build<S: Scalar>(
        &self,
        bx: &BoxSpec,
        seed: u64,
    ) -> Result<BoundaryCondition<S>, ConfigError> {
        if self.mode == BcMode::Periodic {
            let present = [
                ("value", self.value.is_some()),
                ("random", self.random),
                ("values", self.values.is_some()),
                ("premap", self.premap),
            ];
            only("bc", "periodic", &present, &[])?;
            return Ok(BoundaryCondition::Periodic);
        }
        if self.value.is_some() && self.random {
            return Err(invalid("bc.random", "conflicts with bc.value"));
        }
        let mut values: BTreeMap<Site, Option<Circle<S>>> = if self.random {
            random_boundary::<S>(bx, seed)
                .into_iter()
                .map(|(s, v)| (s, Some(v)))
                .collect()
        } else {
            let base = match &self.value {
                Some(v) => Some(Circle::new(v.to_scalar::<S>("bc.value")?)),
                None => None,
            };
            bx.boundary().iter().map(|s| (*s, base.clone())).collect()
        };
        for (site, v) in self.values.iter().flatten() {
            let key = format!("bc.values.\"{site}\"");
            let slot = values
                .get_mut(site)
                .ok_or_else(|| invalid(key.clone(), "not a shell site"))?;
            *slot = Some(Circle::new(v.to_scalar::<S>(&key)?));
        }
        let mut resolved = BTreeMap::new();
        for (site, v) in values {
            let v =
                v.ok_or_else(|| invalid("bc.value", format!("no value for shell site {site}")))?;
            resolved.insert(site, v);
        }
        Ok(match self.mode {
            BcMode::Frozen => BoundaryCondition::Frozen(resolved),
            _ => BoundaryCondition::Free(resolved),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl OutputSection {
    fn is_empty(&self) -> bool {
        self.dir.is_none()
    }
}

fn default_n_initials() -> usize {
    4
}
fn default_t_max() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-8
}
fn default_sensitivity_tol() -> f64 {
    1e-3
}
fn default_growth_tol() -> f64 {
    0.1
}
fn default_growth_max_l() -> u64 {
    4
}
fn default_min_variation() -> f64 {
    1e-3
}
fn default_variation_tol() -> f64 {
    1e-15
}
fn default_separation_slack() -> f64 {
    1e-12
}
fn default_trajectories() -> usize {
    400
}
fn default_burn_in() -> usize {
    1000
}
fn default_horizon() -> usize {
    2000
}
fn default_bins() -> usize {
    64
}
fn default_min_correlation() -> f64 {
    0.9
}
fn default_shift() -> f64 {
    0.2
}
fn default_slack() -> f64 {
    0.1
}
fn default_contraction_horizon() -> usize {
    200
}

/// The probe to run and its parameters; every key has a documented default
/// unless marked required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    CheckTopology(TopologyParams),
    Simulate(SimulateParams),
    Lra(LraParams),
    Sensitivity(SensitivityParams),
    FreeBc(FreeBcParams),
    Periodic(PeriodicParams),
    Stochastic(StochasticParams),
}

impl Experiment {
    pub fn command(&self) -> &'static str {
        match self {
            Experiment::CheckTopology(_) => "check-topology",
            Experiment::Simulate(_) => "simulate",
            Experiment::Lra(_) => "lra",
            Experiment::Sensitivity(_) => "sensitivity",
            Experiment::FreeBc(_) => "free-bc",
            Experiment::Periodic(_) => "periodic",
            Experiment::Stochastic(_) => "stochastic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyParams {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Constant initial interior; random (run 0 of the seed) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<Num>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LraParams {
    #[serde(default = "default_n_initials")]
    pub n_initials: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Convergence tolerance on the final pairwise distance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Largest acceptable fitted rate; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate: Option<f64>,
    /// Run even when the contraction condition fails.
    #[serde(default)]
    pub override_condition: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityParams {
    pub v: Num,
    pub delta: Num,
    /// Arc `(lo, hi)` where the map is linear with slope `slope`.
    pub region_lo: f64,
    pub region_hi: f64,
    pub region_slope: f64,
    #[serde(default = "default_n_initials")]
    pub n_initials: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Relative tolerance on the first-site amplification.
    #[serde(default = "default_sensitivity_tol")]
    pub sensitivity_tol: f64,
    /// Relative tolerance on the per-site growth `ratio^L`.
    #[serde(default = "default_growth_tol")]
    pub growth_tol: f64,
    /// Growth is checked for `L = 1..=growth_max_l`.
    #[serde(default = "default_growth_max_l")]
    pub growth_max_l: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeBcParams {
    #[serde(default = "default_n_initials")]
    pub n_initials: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// The limit must move by more than this over the final window.
    #[serde(default = "default_min_variation")]
    pub min_variation: f64,
    #[serde(default)]
    pub override_condition: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicParams {
    pub xi: Num,
    pub eta: Num,
    /// Map periods of `xi` and `eta`.
    pub periods: [usize; 2],
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Largest allowed spread across sites.
    #[serde(default = "default_variation_tol")]
    pub variation_tol: f64,
    /// Required separation of the two solutions, less `separation_slack`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<Num>,
    #[serde(default = "default_separation_slack")]
    pub separation_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticParams {
    /// Noise amplitude; uniform on the arc of this radius.
    pub epsilon: f64,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Required rank correlation of `s_minus` with `L` when `epsilon > 0`.
    #[serde(default = "default_min_correlation")]
    pub min_correlation: f64,
    /// Run even when the expansion condition fails (negative controls).
    #[serde(default)]
    pub allow_violation: bool,
    /// Site for the Wasserstein contraction diagnostic; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_site: Option<Site>,
    #[serde(default = "default_shift")]
    pub initial_shift: f64,
    /// Allowed excess of the contraction factor over its bound.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_contraction_horizon")]
    pub contraction_horizon: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// The engine described by the box, map, coupling and bc sections.
    pub fn engine_config<S: Scalar>(&self) -> Result<EngineConfig<S>, ConfigError> {
        let sites = self.lattice.sites()?;
        let map = self.map.build::<S>()?;
        let coupling = self.coupling.build::<S>(&sites)?;
        let bx = match &self.lattice.shell {
            Some(shell) => BoxSpec::new(sites.iter().copied(), shell.iter().copied())
                .map_err(|e| invalid("box.shell", e))?,
            None => coupling.natural_box().map_err(|e| invalid("coupling", e))?,
        };
        coupling
            .validate_against(&bx)
            .map_err(|e| invalid("box.shell", e))?;
        let bc = self.bc.build::<S>(&bx, self.seed)?;
        let mut config =
            EngineConfig::new(map, coupling, bc).map_err(|e| invalid("coupling", e))?;
        config.bx = bx;
        config.premap_variant = self.bc.premap;
        config.build().map_err(|e| invalid("bc", e))?;
        Ok(config)
    }
}
