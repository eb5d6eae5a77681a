//! Pseudospectral solver core for a degenerate fourth-order interface model.
//!
//! The crate simulates conserved phase-field dynamics on periodic domains
//! where the mobility and a stabilizing weight both vanish (up to a floor)
//! in the bulk phases. Modules:
//!
//! - [`spectral`]: periodic grids, real FFT plans, differential operators
//! - [`model`]: potentials, stabilizer, chemical potential, evolution rhs
//! - [`dynamics`]: adaptive time stepping and trajectory sampling
//! - [`diagnostics`]: energies, dissipation rate, conserved integral
//! - [`profile`]: planar transition profile and sharp-interface constants
//! - [`interface`]: contour extraction, curvature, normal-velocity checks
//! - [`climb`]: nonlocal half-Laplacian force term and loop scenarios
//! - [`sweep`]: stabilizer-limit and grid-refinement studies

pub mod climb;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod interface;
pub mod model;
pub mod profile;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
