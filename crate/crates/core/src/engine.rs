//! Box-restricted coupled map lattice dynamics `I ∘ T` under frozen, free or
//! periodic boundary conditions.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::circle::Circle;
use crate::coupling::{CompiledCoupling, Coupling, CouplingError};
use crate::lattice::{BoxSpec, LatticeState, Layout, Site};
use crate::maps::{LocalMap, MapError};
use crate::scalar::Scalar;
use crate::topology::Enumeration;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("boundary values do not match the shell: {0}")]
    BoundaryMismatch(String),
    #[error("periodic boundary conditions need a rectangular box")]
    NotRectangular,
    #[error("map override for {0}, which is not a lattice site")]
    UnknownSite(Site),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCondition<S> {
    /// Shell values held fixed for all time.
    Frozen(BTreeMap<Site, Circle<S>>),
    /// Shell values advanced by the local map every step.
    Free(BTreeMap<Site, Circle<S>>),
    /// Stencils wrap around the rectangular box.
    Periodic,
}

impl<S: Scalar> BoundaryCondition<S> {
    /// The same value on every shell site.
    pub fn frozen_uniform(bx: &BoxSpec, value: Circle<S>) -> Self {
        BoundaryCondition::Frozen(bx.boundary().iter().map(|s| (*s, value.clone())).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig<S> {
    pub bx: BoxSpec,
    pub map: LocalMap<S>,
    /// Per-site replacements for `map`.
    pub site_maps: BTreeMap<Site, LocalMap<S>>,
    pub coupling: Coupling<S>,
    pub bc: BoundaryCondition<S>,
    /// Apply local maps only inside the box (shell values enter the interaction unmapped).
    pub premap_variant: bool,
}

impl<S: Scalar> EngineConfig<S> {
    /// Box taken from the coupling's stencils and their shell.
    pub fn new(
        map: LocalMap<S>,
        coupling: Coupling<S>,
        bc: BoundaryCondition<S>,
    ) -> Result<Self, EngineError> {
        let bx = coupling.natural_box()?;
        Ok(EngineConfig {
            bx,
            map,
            site_maps: BTreeMap::new(),
            coupling,
            bc,
            premap_variant: false,
        })
    }

    pub fn with_bc(mut self, bc: BoundaryCondition<S>) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_premap(mut self, premap_variant: bool) -> Self {
        self.premap_variant = premap_variant;
        self
    }

    pub fn map_at(&self, site: &Site) -> &LocalMap<S> {
        self.site_maps.get(site).unwrap_or(&self.map)
    }

    pub fn build(&self) -> Result<Engine<S>, EngineError> {
        Engine::new(self.clone())
    }
}

/// A validated configuration resolved to dense indices.
#[derive(Clone, Debug)]
pub struct Engine<S> {
    config: EngineConfig<S>,
    layout: Arc<Layout>,
    coupling: CompiledCoupling<S>,
    maps: Vec<LocalMap<S>>,
    /// Index into `maps` for every layout slot.
    map_of: Vec<usize>,
    /// Shell slot and the interior slot it mirrors, for periodic boxes.
    mirrors: Vec<(usize, usize)>,
}

impl<S: Scalar> Engine<S> {
    pub fn new(config: EngineConfig<S>) -> Result<Self, EngineError> {
        config.coupling.validate_against(&config.bx)?;
        config.map.validate()?;
        let layout = config.bx.layout();
        let wrap = match &config.bc {
            BoundaryCondition::Periodic => {
                Some(config.bx.rect().ok_or(EngineError::NotRectangular)?)
            }
            BoundaryCondition::Frozen(values) | BoundaryCondition::Free(values) => {
                let keys: Vec<Site> = values.keys().copied().collect();
                if keys != config.bx.boundary() {
                    return Err(EngineError::BoundaryMismatch(format!(
                        "expected {} shell sites, got {}",
                        config.bx.boundary().len(),
                        keys.len()
                    )));
                }
                None
            }
        };
        let coupling = config.coupling.compile(&layout, wrap)?;
        let mut maps = vec![config.map.clone()];
        let mut map_of = vec![0; layout.len()];
        for (site, m) in &config.site_maps {
            m.validate()?;
            let i = layout
                .index_of(site)
                .ok_or(EngineError::UnknownSite(*site))?;
            maps.push(m.clone());
            map_of[i] = maps.len() - 1;
        }
        let mirrors = match wrap {
            Some(rect) => layout
                .boundary()
                .iter()
                .map(|b| {
                    let i = layout.index_of(b).unwrap();
                    (i, layout.index_of(&rect.wrap(b)).unwrap())
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(Engine {
            config,
            layout,
            coupling,
            maps,
            map_of,
            mirrors,
        })
    }

    pub fn config(&self) -> &EngineConfig<S> {
        &self.config
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// State with the given interior values and the configured shell values.
    pub fn state_with_interior(
        &self,
        mut interior: impl FnMut(&Site) -> Circle<S>,
    ) -> LatticeState<S> {
        let mut state = LatticeState::from_fn(self.layout.clone(), |site| match &self.config.bc {
            BoundaryCondition::Frozen(v) | BoundaryCondition::Free(v) if v.contains_key(site) => {
                v[site].clone()
            }
            _ if self.config.bx.in_shell(site) => Circle::zero(),
            _ => interior(site),
        });
        self.sync_mirrors(state.values_mut());
        state
    }

    fn sync_mirrors(&self, values: &mut [Circle<S>]) {
        for &(b, i) in &self.mirrors {
            values[b] = values[i].clone();
        }
    }

    /// One step of `I ∘ T`.
    pub fn step(&self, state: &LatticeState<S>) -> LatticeState<S> {
        let mut out = state.clone();
        self.step_into(state, &mut out);
        out
    }

    /// Writes the successor of `state` into `out`, which must share its layout.
    pub fn step_into(&self, state: &LatticeState<S>, out: &mut LatticeState<S>) {
        self.step_perturbed(state, out, |_| {});
    }

    /// Like [`Engine::step_into`], with `perturb` applied to every mapped
    /// interior value, in layout order, before the interaction.
    pub fn step_perturbed(
        &self,
        state: &LatticeState<S>,
        out: &mut LatticeState<S>,
        mut perturb: impl FnMut(&mut Circle<S>),
    ) {
        assert!(
            Arc::ptr_eq(state.layout(), &self.layout) || **state.layout() == *self.layout,
            "state layout does not match the engine"
        );
        let values = state.values();
        let n = self.layout.n_interior();
        let free = matches!(self.config.bc, BoundaryCondition::Free(_));
        let mut mapped: Vec<Circle<S>> = values
            .iter()
            .enumerate()
            .map(|(i, x)| {
                if i < n || !self.config.premap_variant {
                    self.maps[self.map_of[i]].apply(x)
                } else {
                    x.clone()
                }
            })
            .collect();
        mapped[..n].iter_mut().for_each(&mut perturb);
        let out_values = out.values_mut();
        self.coupling.apply(&mapped, out_values);
        for i in n..values.len() {
            out_values[i] = if free {
                self.maps[self.map_of[i]].apply(&values[i])
            } else {
                values[i].clone()
            };
        }
        self.sync_mirrors(out_values);
    }

    /// Lazy, unbounded sequence starting with `initial`.
    pub fn iter(&self, initial: LatticeState<S>) -> Trajectory<'_, S> {
        Trajectory {
            engine: self,
            next: Some(initial),
        }
    }

    /// `t_max + 1` states, element 0 being `initial`.
    pub fn trajectory(&self, initial: LatticeState<S>, t_max: usize) -> Vec<LatticeState<S>> {
        self.iter(initial).take(t_max + 1).collect()
    }

    /// Shell values `T⁻¹(x')` under which the plain engine reproduces the
    /// pre-map variant with frozen values `x'`.
    pub fn premap_equivalence_witness(
        &self,
        bc_values: &BTreeMap<Site, Circle<S>>,
    ) -> Result<BTreeMap<Site, Circle<S>>, EngineError> {
        if !self.config.premap_variant {
            return Err(EngineError::Unsupported(
                "engine is not the pre-map variant".into(),
            ));
        }
        if !matches!(self.config.bc, BoundaryCondition::Frozen(_)) {
            return Err(EngineError::Unsupported(
                "pre-map equivalence is defined for frozen boundary values".into(),
            ));
        }
        bc_values
            .iter()
            .map(|(site, x)| {
                if !self.config.bx.in_shell(site) {
                    return Err(EngineError::UnknownSite(*site));
                }
                Ok((*site, self.config.map_at(site).inverse(x)?))
            })
            .collect()
    }

    /// CSV with one row per time step: `t` then one column per interior site,
    /// ordered by `order` when given, else by site.
    pub fn trajectory_csv<'a>(
        &self,
        states: impl IntoIterator<Item = &'a LatticeState<S>>,
        order: Option<&Enumeration>,
    ) -> String {
        let columns: Vec<Site> = match order {
            Some(e) => e.ordered_sites(),
            None => self.layout.interior().to_vec(),
        };
        let slots: Vec<usize> = columns
            .iter()
            .map(|s| self.layout.index_of(s).unwrap())
            .collect();
        let header = std::iter::once("t".to_string()).chain(columns.iter().map(Site::to_string));
        let rows = states.into_iter().enumerate().map(|(t, state)| {
            std::iter::once(t.to_string())
                .chain(
                    slots
                        .iter()
                        .map(|&i| state.values()[i].to_f64().to_string()),
                )
                .collect::<Vec<_>>()
        });
        crate::table::csv(header, rows)
    }
}

pub struct Trajectory<'a, S> {
    engine: &'a Engine<S>,
    next: Option<LatticeState<S>>,
}

impl<S: Scalar> Iterator for Trajectory<'_, S> {
    type Item = LatticeState<S>;

    fn next(&mut self) -> Option<Self::Item> {
        let current = self.next.take()?;
        self.next = Some(self.engine.step(&current));
        Some(current)
    }
}
