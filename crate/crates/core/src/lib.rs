//! Mean-field age-dependent Hawkes networks: closed-form steady state and
//! stimulus sensitivity, a thinning simulator for finite networks and a
//! solver for the age-structured transport equation.
pub mod analytics;
pub mod checks;
pub mod cli;
pub mod io;
pub mod pde;
pub mod presets;
pub mod sim;

pub use analytics::{ModelParams, StationaryState};
