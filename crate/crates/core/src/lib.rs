//! Finite-box coupled map lattices on the circle: boundary-driven convergence
//! of the interior (long range action) and its fate under small noise.
//!
//! Everything numeric is generic over [`Scalar`], implemented for `f64`, `f32`
//! and `BigRational`. The exact type matters for chaotic maps: a float orbit of
//! `x -> 2x mod 1` reaches 0 after about 53 steps. The aliases below fix the
//! everyday `f64` choice.

pub mod analysis;
pub mod circle;
pub mod coupling;
pub mod engine;
pub mod lattice;
pub mod maps;
pub mod scalar;
pub mod stochastic;
pub mod table;
pub mod topology;

pub use circle::{circle_dist, Circle};
pub use coupling::{Coupling, CouplingError, LiftRule, LraCondition};
pub use engine::{BoundaryCondition, Engine, EngineConfig, EngineError};
pub use lattice::{chain_sites, rect_sites, BoxSpec, LatticeState, Site};
pub use maps::{LocalMap, MapError, MapKind};
pub use scalar::Scalar;
pub use topology::{BoundaryDistance, ConnectivityGraph, Enumeration, TopologyError};

pub use num_rational::BigRational;

pub type CirclePoint = Circle<f64>;
pub type LocalMapSpec = LocalMap<f64>;
pub type CouplingSpec = Coupling<f64>;
pub type State = LatticeState<f64>;
pub type Config = EngineConfig<f64>;
pub type Bc = BoundaryCondition<f64>;
pub type EnsembleConfig = stochastic::EnsembleConfig<f64>;
