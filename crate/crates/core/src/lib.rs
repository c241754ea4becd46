//! Macroscopic fluctuation theory for the boundary-driven symmetric exclusion
//! process in weak contact with reservoirs.
//!
//! The crate computes the quasi-potential `S(γ)` through the Euler-Lagrange
//! problem, builds the optimal fluctuation path from the adjoint
//! hydrodynamics, and evaluates dynamical rate functionals along paths.

pub mod error;
pub mod numerics;
pub mod dynamics;
pub mod euler_lagrange;
pub mod quasipotential;
pub mod rate;
pub mod spectral;

pub use error::{MftError, Result};
pub use numerics::{DensityProfile, Grid, Params, Path, Profile};
