//! Finite-difference solver for the mean-field age-structured equation.
//!
//! The density of ages `u(t, s)` is transported at unit speed, loses mass at
//! rate `mu + x(t)` once `s >= delta`, and the lost mass re-enters at age 0.
//! The interaction `x` relaxes towards `alpha * a(t)` with the exponential
//! kernel's time constant.
//!
//! With `dt = ds` transport is an exact shift of the grid. Firing is applied
//! with the exact one-step decay factor, so mass is conserved by bookkeeping
//! and the only discretization error is first order in `ds`.

mod solve;
mod state;

pub use solve::{
    convergence_window, solve_from, solve_to_stationarity, PdeSolution, SolveOptions, TrajectoryPoint,
};
pub use state::{init_state, step, InitialDensity, PdeState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{steady_activity, ModelParams};

#[derive(Debug, Clone, Error)]
pub enum PdeError {
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("InvalidInitialDensity: {0}")]
    InvalidInitialDensity(String),
    #[error("NonFiniteState: {0}")]
    NonFiniteState(String),
    #[error("NotConverged: relative spread {spread:e} above tolerance at t = {}", solution.state.t())]
    NotConverged { spread: f64, solution: Box<PdeSolution> },
}

impl PdeError {
    pub fn name(&self) -> &'static str {
        match self {
            PdeError::InvalidGrid(_) => "InvalidGrid",
            PdeError::InvalidInitialDensity(_) => "InvalidInitialDensity",
            PdeError::NonFiniteState(_) => "NonFiniteState",
            PdeError::NotConverged { .. } => "NotConverged",
        }
    }
}

pub type Result<T> = std::result::Result<T, PdeError>;

/// `h(t) = exp(-t / tau) / tau`, the only kernel with a one-variable ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialKernel {
    pub tau: f64,
}

impl ExponentialKernel {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(PdeError::InvalidGrid(format!("kernel time constant must be positive, got {tau}")));
        }
        Ok(ExponentialKernel { tau })
    }
}

impl Default for ExponentialKernel {
    fn default() -> Self {
        ExponentialKernel { tau: crate::sim::Kernel::DEFAULT_TAU }
    }
}

/// Age grid. Cells are `[k ds, (k+1) ds)` for `k < n_cells`; the time step
/// is always `ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub ds: f64,
    pub s_max: f64,
    pub n_cells: usize,
}

/// Tail mass of `u_inf` beyond the default truncation is about `exp(-20)`.
pub const TAIL_DECAY_LENGTHS: f64 = 20.0;

impl PdeGrid {
    pub fn new(ds: f64, s_max: f64) -> Result<Self> {
        if !(ds.is_finite() && ds > 0.0) {
            return Err(PdeError::InvalidGrid(format!("ds must be positive, got {ds}")));
        }
        if !(s_max.is_finite() && s_max >= ds) {
            return Err(PdeError::InvalidGrid(format!("s_max must be at least ds, got {s_max}")));
        }
        // Guard against s_max / ds landing a hair above an integer.
        let ratio = s_max / ds;
        let n_cells = if (ratio - ratio.round()).abs() < 1e-9 * ratio {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(PdeGrid { ds, s_max, n_cells })
    }

    /// Smallest truncation the solver accepts for `params`.
    pub fn min_s_max(params: &ModelParams) -> Result<f64> {
        let a_guess = steady_activity(params).map_err(|e| PdeError::InvalidGrid(e.to_string()))?;
        let rate = params.mu + params.alpha * a_guess;
        if !(rate > 0.0) {
            return Err(PdeError::InvalidGrid("zero stationary firing rate: no finite truncation".into()));
        }
        Ok(params.delta + TAIL_DECAY_LENGTHS / rate)
    }

    /// Grid with step `ds` and the smallest admissible truncation.
    pub fn for_params(params: &ModelParams, ds: f64) -> Result<Self> {
        let s_max = Self::min_s_max(params)?;
        PdeGrid::new(ds, (s_max / ds).ceil() * ds)
    }

    pub fn dt(&self) -> f64 {
        self.ds
    }

    /// Number of refractory cells, `delta` snapped to the nearest multiple of `ds`.
    pub fn refractory_cells(&self, delta: f64) -> usize {
        (delta / self.ds).round() as usize
    }

    pub fn snapped_delta(&self, delta: f64) -> f64 {
        self.refractory_cells(delta) as f64 * self.ds
    }

    /// Checks the truncation against the stationary tail of `params`.
    pub fn check_for(&self, params: &ModelParams) -> Result<()> {
        let cells = self.refractory_cells(params.delta);
        if cells >= self.n_cells {
            return Err(PdeError::InvalidGrid(format!(
                "grid of {} cells does not extend past the refractory period ({cells} cells)",
                self.n_cells
            )));
        }
        let need = Self::min_s_max(params)?;
        // covered length, with slack for the rounding in `new`
        let covered = self.n_cells as f64 * self.ds;
        if covered < need * (1.0 - 1e-12) {
            return Err(PdeError::InvalidGrid(format!(
                "s_max = {covered} is below {need}, the truncation needed for these parameters"
            )));
        }
        Ok(())
    }
}
