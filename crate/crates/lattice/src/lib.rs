//! Kinetic Monte Carlo for the symmetric simple exclusion process on
//! `{1, …, N-1}` in weak contact with two reservoirs, with the empirical
//! measures and statistical checks used against the macroscopic equations.

pub mod analysis;
pub mod error;
pub mod sim;
pub mod state;

pub use analysis::{
    hydrodynamic_check, particle_number_test, stationary_check, ChiSquareReport, HydroReport,
    StationaryReport,
};
pub use error::{LatticeError, Result};
pub use sim::{run_replicas, simulate, SimOptions, SimResult};
pub use state::{bin_centers, bin_profile, empirical_profile, LatticeState};
