//! Simulator for a multi-level flavor system coupled to a thermal bath.
//!
//! Each energy level `E_i` carries a `d x d` flavor density block `rho(E_i)`.
//! Blocks precess under `lambda(E_i)`, and a thermal bath moves probability
//! between levels through the rate matrix `Gamma` while the coupling operator
//! `zeta` decides how much flavor coherence survives each transition.
//!
//! The [`doublewell`] module builds the standard test system: a symmetric
//! double square well whose tunnelling doublets supply `lambda = g sigma1`
//! and whose dipole elements supply `Gamma`.

pub mod doublewell;
pub mod error;
pub mod evolution;
pub mod model;
pub mod rates;
pub mod scenarios;

pub use error::{Error, Result};
pub use model::{
    thermal_initial_state, validate_model, BiasSchedule, BiasShape, CouplingOperator, DensityState, FlavorMatrix,
    ModelSpec, Violation,
};
