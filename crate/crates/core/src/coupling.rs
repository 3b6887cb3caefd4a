//! The interaction operator: per-site convex combinations of circle values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{fold_offset, signed_offset, Circle};
use crate::lattice::{BoxSpec, LatticeError, LatticeState, Layout, Rect, Site};
use crate::maps::LocalMap;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("negative weight at site {site} for input {input}")]
    NegativeWeight { site: Site, input: Site },
    #[error("weights at site {site} sum to {sum}, not 1")]
    WeightSum { site: Site, sum: f64 },
    #[error("site {0} has no stencil entry for itself")]
    MissingSelf(Site),
    #[error("interior site {0} has no stencil")]
    MissingStencil(Site),
    #[error("stencil key {0} is not an interior site")]
    StencilOutsideBox(Site),
    #[error("site {site} reads {input}, which is neither in the box nor in its shell")]
    DanglingInput { site: Site, input: Site },
    #[error("state has no value for input {0}")]
    MissingInput(Site),
    #[error("site {site} reads {input} at lattice distance {distance} > {radius}")]
    NotShortRange {
        site: Site,
        input: Site,
        distance: u64,
        radius: u64,
    },
    #[error("{0}")]
    Dimension(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// How inputs are lifted from the circle to the line before averaging.
///
/// Both rules coincide whenever every input lies within 1/4 of the anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftRule {
    /// Every input is lifted to the representative nearest the site's own value.
    SelfAnchored,
    /// Inputs are lifted around the heaviest cross input; the site's own offset
    /// from it is tent-folded, so the site's response to its own value is a
    /// contraction of degree zero. Ties go to the first input in stencil order.
    UpstreamFolded,
}

/// Row-stochastic interaction with explicit per-site stencils.
///
/// Each stencil lists `(input, weight)` pairs and always contains the site
/// itself.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling<S> {
    stencils: BTreeMap<Site, Vec<(Site, S)>>,
    lift: LiftRule,
}

/// Result of checking the contraction hypothesis `Λ_I Λ_T < 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LraCondition {
    pub lambda_interaction: f64,
    pub lambda_map: f64,
    pub lambda_product: f64,
    pub satisfied: bool,
    /// `false` when `Λ_I = 1`: constructible, but not a contraction.
    pub in_interaction_class: bool,
}

fn weight_tol<S: Scalar>() -> S {
    match S::wrap_snap() {
        Some(_) => S::from_f64(1e-12),
        None => S::zero(),
    }
}

impl<S: Scalar> Coupling<S> {
    /// Validates weights; inputs are checked against a box separately.
    pub fn from_table(
        stencils: BTreeMap<Site, Vec<(Site, S)>>,
        lift: LiftRule,
    ) -> Result<Self, CouplingError> {
        let tol = weight_tol::<S>();
        for (site, row) in &stencils {
            if !row.iter().any(|(input, _)| input == site) {
                return Err(CouplingError::MissingSelf(*site));
            }
            let mut sum = S::zero();
            for (input, w) in row {
                if *w < S::zero() {
                    return Err(CouplingError::NegativeWeight {
                        site: *site,
                        input: *input,
                    });
                }
                sum = sum + w.clone();
            }
            if (sum.clone() - S::one()).abs() > tol {
                return Err(CouplingError::WeightSum {
                    site: *site,
                    sum: sum.to_f64(),
                });
            }
        }
        Ok(Coupling { stencils, lift })
    }

    /// Same `(offset, weight)` list at every site; offset zero is the site itself.
    pub fn translation_invariant(
        sites: &[Site],
        offsets: &[(Site, S)],
        lift: LiftRule,
    ) -> Result<Self, CouplingError> {
        let mut table = BTreeMap::new();
        for site in sites {
            let mut row: Vec<(Site, S)> = Vec::with_capacity(offsets.len());
            for (off, w) in offsets {
                if off.dim() != site.dim() {
                    return Err(CouplingError::Dimension(format!(
                        "offset {off} does not match site {site}"
                    )));
                }
                let input = site.offset(off);
                match row.iter_mut().find(|(s, _)| *s == input) {
                    Some(entry) => entry.1 = entry.1.clone() + w.clone(),
                    None => row.push((input, w.clone())),
                }
            }
            table.insert(*site, row);
        }
        Coupling::from_table(table, lift)
    }

    /// Nearest-neighbour averaging: weight `c` per neighbour, `1 - 2dc` on the site.
    pub fn diffusive(sites: &[Site], c: S) -> Result<Self, CouplingError> {
        let dim = sites.first().map(Site::dim).unwrap_or(1);
        let self_w = S::one() - S::from_i64(2 * dim as i64) * c.clone();
        let mut offsets = vec![(zero_offset(dim), self_w)];
        for n in neighbour_offsets(dim) {
            offsets.push((n, c.clone()));
        }
        Coupling::translation_invariant(sites, &offsets, LiftRule::SelfAnchored)
    }

    /// `x_i -> (1 - c) x_i + c x_{i-1}` on a chain.
    pub fn unidirectional(sites: &[Site], c: S) -> Result<Self, CouplingError> {
        Coupling::unidirectional_k(sites, &[S::one() - c.clone(), c])
    }

    /// `x_i -> Σ_k w_k x_{i-k}`: `weights[0]` is the self weight.
    pub fn unidirectional_k(sites: &[Site], weights: &[S]) -> Result<Self, CouplingError> {
        require_dim(sites, 1)?;
        let offsets: Vec<(Site, S)> = weights
            .iter()
            .enumerate()
            .map(|(k, w)| (Site::D1(-(k as i64)), w.clone()))
            .collect();
        Coupling::translation_invariant(sites, &offsets, LiftRule::UpstreamFolded)
    }

    /// Two-dimensional North-East stencil: weights for the site itself, its
    /// east neighbour `(x+1, y)` and its north neighbour `(x, y+1)`.
    pub fn toom_ne(sites: &[Site], weights: [S; 3]) -> Result<Self, CouplingError> {
        require_dim(sites, 2)?;
        let [w_self, w_east, w_north] = weights;
        let offsets = [
            (Site::D2(0, 0), w_self),
            (Site::D2(1, 0), w_east),
            (Site::D2(0, 1), w_north),
        ];
        Coupling::translation_invariant(sites, &offsets, LiftRule::UpstreamFolded)
    }

    pub fn with_lift(mut self, lift: LiftRule) -> Self {
        self.lift = lift;
        self
    }

    pub fn lift(&self) -> LiftRule {
        self.lift
    }

    pub fn stencils(&self) -> &BTreeMap<Site, Vec<(Site, S)>> {
        &self.stencils
    }

    pub fn stencil(&self, site: &Site) -> Option<&[(Site, S)]> {
        self.stencils.get(site).map(Vec::as_slice)
    }

    /// The box made of the stencil sites and the shell of every outside input.
    pub fn natural_box(&self) -> Result<BoxSpec, CouplingError> {
        let sites: BTreeSet<Site> = self.stencils.keys().copied().collect();
        let shell: BTreeSet<Site> = self
            .stencils
            .values()
            .flatten()
            .map(|(s, _)| *s)
            .filter(|s| !sites.contains(s))
            .collect();
        Ok(BoxSpec::new(sites, shell)?)
    }

    /// Checks that the stencils cover exactly the box and read only box or shell sites.
    pub fn validate_against(&self, bx: &BoxSpec) -> Result<(), CouplingError> {
        for site in bx.sites() {
            if !self.stencils.contains_key(site) {
                return Err(CouplingError::MissingStencil(*site));
            }
        }
        for (site, row) in &self.stencils {
            if !bx.contains(site) {
                return Err(CouplingError::StencilOutsideBox(*site));
            }
            for (input, _) in row {
                if !bx.contains(input) && !bx.in_shell(input) {
                    return Err(CouplingError::DanglingInput {
                        site: *site,
                        input: *input,
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest lattice distance between a site and one of its (weighted) inputs.
    pub fn radius(&self) -> u64 {
        self.stencils
            .iter()
            .flat_map(|(site, row)| {
                row.iter()
                    .filter(|(_, w)| !w.is_zero())
                    .filter_map(move |(input, _)| site.lattice_distance(input))
            })
            .max()
            .unwrap_or(0)
    }

    pub fn check_short_range(&self, radius: u64) -> Result<(), CouplingError> {
        for (site, row) in &self.stencils {
            for (input, w) in row {
                let distance = site.lattice_distance(input).unwrap_or(u64::MAX);
                if !w.is_zero() && distance > radius {
                    return Err(CouplingError::NotShortRange {
                        site: *site,
                        input: *input,
                        distance,
                        radius,
                    });
                }
            }
        }
        Ok(())
    }

    /// Interaction constant: the largest single weight over all stencils.
    pub fn interaction_lambda(&self) -> S {
        self.stencils
            .values()
            .flatten()
            .map(|(_, w)| w.clone())
            .fold(S::zero(), |m, w| if w > m { w } else { m })
    }

    /// `(a, b)`: the largest self weight and the smallest total cross weight.
    pub fn spread_coefficients(&self) -> (S, S) {
        let mut a = S::zero();
        let mut b: Option<S> = None;
        for (site, row) in &self.stencils {
            let mut cross = S::zero();
            for (input, w) in row {
                if input == site {
                    if *w > a {
                        a = w.clone();
                    }
                } else {
                    cross = cross + w.clone();
                }
            }
            b = Some(match b {
                Some(b) if b < cross => b,
                _ => cross,
            });
        }
        (a, b.unwrap_or_else(S::zero))
    }

    pub fn check_lra_condition(&self, map: &LocalMap<S>) -> LraCondition {
        let li = self.interaction_lambda();
        let product = li.clone() * map.lambda_upper.clone();
        LraCondition {
            lambda_interaction: li.to_f64(),
            lambda_map: map.lambda_upper.to_f64(),
            lambda_product: product.to_f64(),
            satisfied: product < S::one(),
            in_interaction_class: li < S::one(),
        }
    }

    /// Index-based form for a layout; `wrap` folds inputs into a periodic rectangle.
    pub fn compile(
        &self,
        layout: &Layout,
        wrap: Option<&Rect>,
    ) -> Result<CompiledCoupling<S>, CouplingError> {
        let mut rows = Vec::with_capacity(layout.n_interior());
        for site in layout.interior() {
            let stencil = self
                .stencils
                .get(site)
                .ok_or(CouplingError::MissingStencil(*site))?;
            let index = |s: &Site| {
                let s = wrap.map_or(*s, |r| r.wrap(s));
                layout.index_of(&s).ok_or(CouplingError::MissingInput(s))
            };
            let own = index(site)?;
            let mut self_w = S::zero();
            let mut cross: Vec<(usize, S)> = Vec::new();
            for (input, w) in stencil {
                if input == site {
                    self_w = self_w + w.clone();
                } else if !w.is_zero() {
                    cross.push((index(input)?, w.clone()));
                }
            }
            rows.push(compile_row(own, self_w, cross, self.lift));
        }
        Ok(CompiledCoupling { rows })
    }

    /// Applies the interaction to every interior site; shell values pass through.
    pub fn apply_interaction(
        &self,
        state: &LatticeState<S>,
    ) -> Result<LatticeState<S>, CouplingError> {
        let compiled = self.compile(state.layout(), None)?;
        let mut out = state.clone();
        compiled.apply(state.values(), out.values_mut());
        Ok(out)
    }
}

fn require_dim(sites: &[Site], dim: usize) -> Result<(), CouplingError> {
    match sites.iter().find(|s| s.dim() != dim) {
        Some(s) => Err(CouplingError::Dimension(format!(
            "constructor needs {dim}-dimensional sites, got {s}"
        ))),
        None => Ok(()),
    }
}

fn zero_offset(dim: usize) -> Site {
    if dim == 1 {
        Site::D1(0)
    } else {
        Site::D2(0, 0)
    }
}

fn neighbour_offsets(dim: usize) -> Vec<Site> {
    if dim == 1 {
        vec![Site::D1(-1), Site::D1(1)]
    } else {
        vec![
            Site::D2(-1, 0),
            Site::D2(1, 0),
            Site::D2(0, -1),
            Site::D2(0, 1),
        ]
    }
}

#[derive(Clone, Debug)]
struct Row<S> {
    target: usize,
    anchor: usize,
    /// Cross inputs lifted to the representative nearest the anchor.
    linear: Vec<(usize, S)>,
    /// Own input, tent-folded around the anchor.
    folded: Option<(usize, S)>,
}

fn compile_row<S: Scalar>(own: usize, self_w: S, cross: Vec<(usize, S)>, lift: LiftRule) -> Row<S> {
    match lift {
        _ if cross.is_empty() => Row {
            target: own,
            anchor: own,
            linear: Vec::new(),
            folded: None,
        },
        LiftRule::SelfAnchored => Row {
            target: own,
            anchor: own,
            linear: cross,
            folded: None,
        },
        LiftRule::UpstreamFolded => {
            let mut best = 0;
            for (k, (_, w)) in cross.iter().enumerate() {
                if *w > cross[best].1 {
                    best = k;
                }
            }
            let anchor = cross[best].0;
            Row {
                target: own,
                anchor,
                linear: cross
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| *k != best)
                    .map(|(_, e)| e)
                    .collect(),
                folded: (!self_w.is_zero()).then_some((own, self_w)),
            }
        }
    }
}

/// A coupling resolved to dense indices of one layout.
#[derive(Clone, Debug)]
pub struct CompiledCoupling<S> {
    rows: Vec<Row<S>>,
}

impl<S: Scalar> CompiledCoupling<S> {
    /// Writes the interacted interior values of `input` into `out`.
    ///
    /// `out` must have the layout length; its shell entries are left untouched.
    pub fn apply(&self, input: &[Circle<S>], out: &mut [Circle<S>]) {
        for row in &self.rows {
            let a = input[row.anchor].value();
            let mut acc = a.clone();
            for (k, w) in &row.linear {
                acc = acc + w.clone() * signed_offset(a, input[*k].value());
            }
            if let Some((k, w)) = &row.folded {
                acc = acc + w.clone() * fold_offset(signed_offset(a, input[*k].value()));
            }
            out[row.target] = Circle::new(acc);
        }
    }
}
