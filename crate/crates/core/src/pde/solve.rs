use std::collections::VecDeque;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{init_state, step, ExponentialKernel, InitialDensity, PdeError, PdeGrid, PdeState, Result};
use crate::analytics::{stationary_state, steady_activity, ModelParams};

/// Trajectory samples kept per convergence window when no stride is given.
const SAMPLES_PER_WINDOW: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative spread `(max a - min a) / a` over one window that counts as
    /// stationary.
    pub tol: f64,
    pub max_t: f64,
    /// Keep every `record_every`-th step in the trajectory; 0 picks a stride
    /// giving a few hundred samples per window.
    pub record_every: usize,
}

impl SolveOptions {
    pub fn new(tol: f64, max_t: f64) -> Self {
        SolveOptions { tol, max_t, record_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub a: f64,
    pub x: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub state: PdeState,
    pub converged: bool,
    /// Relative spread of `a` over the last full window (infinite if none).
    pub spread: f64,
    pub window: f64,
    pub history: Vec<TrajectoryPoint>,
    pub delta_snapped: f64,
    /// Closed-form activity at the snapped refractory period.
    pub a_inf: Option<f64>,
    /// L1 distance between the final cell masses (and tail) and those of the
    /// closed-form stationary density.
    pub l1_distance: Option<f64>,
    /// Largest `|mass - 1|` seen over the run.
    pub max_mass_drift: f64,
    pub wall_clock_seconds: f64,
}

impl PdeSolution {
    pub fn a_end(&self) -> f64 {
        self.state.a()
    }

    pub fn relative_error(&self) -> Option<f64> {
        self.a_inf.map(|a| (self.a_end() - a).abs() / a)
    }

    /// Writes the `t,a,x,mass` table.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(comment) = comment {
            writeln!(out, "# {comment}")?;
        }
        writeln!(out, "t,a,x,mass")?;
        for p in &self.history {
            writeln!(out, "{},{},{},{}", p.t, p.a, p.x, p.mass)?;
        }
        out.flush()
    }
}

/// Width `5 max(1/mu, tau, delta)` of the sliding convergence window. At
/// `mu = 0` the stationary firing rate `alpha a_inf` stands in for `mu`.
pub fn convergence_window(params: &ModelParams, kernel: &ExponentialKernel) -> Result<f64> {
    let rate = if params.mu > 0.0 {
        params.mu
    } else {
        let a = steady_activity(params).map_err(|e| PdeError::InvalidGrid(e.to_string()))?;
        params.alpha * a
    };
    if !(rate > 0.0) {
        return Err(PdeError::InvalidGrid("no firing at all: the convergence window is infinite".into()));
    }
    Ok(5.0 * (1.0 / rate).max(kernel.tau).max(params.delta))
}

/// Runs from the default initial density (all mass at `delta + 5/(mu+1)`).
pub fn solve_to_stationarity(
    params: &ModelParams,
    grid: &PdeGrid,
    kernel: &ExponentialKernel,
    tol: f64,
    max_t: f64,
) -> Result<PdeSolution> {
    let state = init_state(params, grid, InitialDensity::default_for(params))?;
    solve_from(state, params, kernel, &SolveOptions::new(tol, max_t))
}

/// Steps `state` until `a` varies by at most `tol` (relative) over a window
/// of [`convergence_window`], or until `max_t`.
pub fn solve_from(
    mut state: PdeState,
    params: &ModelParams,
    kernel: &ExponentialKernel,
    options: &SolveOptions,
) -> Result<PdeSolution> {
    if !(options.tol > 0.0) {
        return Err(PdeError::InvalidGrid(format!("tolerance must be positive, got {}", options.tol)));
    }
    if !(options.max_t >= 0.0) {
        return Err(PdeError::InvalidGrid(format!("max_t must be nonnegative, got {}", options.max_t)));
    }
    let started = Instant::now();
    let ds = state.grid().ds;
    let window = convergence_window(params, kernel)?;
    let window_steps = ((window / ds).ceil() as u64).max(1);
    let stride = match options.record_every {
        0 => (window_steps as usize / SAMPLES_PER_WINDOW).max(1) as u64,
        k => k as u64,
    };
    let max_steps = (options.max_t / ds).ceil() as u64;

    let point = |s: &PdeState| TrajectoryPoint {
        t: s.t(),
        a: s.a(),
        x: s.x(),
        mass: s.mass(),
    };
    let mut history = vec![point(&state)];
    // monotone deques of (step, a) for the running max and min
    let mut highs: VecDeque<(u64, f64)> = VecDeque::new();
    let mut lows: VecDeque<(u64, f64)> = VecDeque::new();
    let push = |steps: u64, a: f64, highs: &mut VecDeque<(u64, f64)>, lows: &mut VecDeque<(u64, f64)>| {
        while highs.back().is_some_and(|&(_, v)| v <= a) {
            highs.pop_back();
        }
        highs.push_back((steps, a));
        while lows.back().is_some_and(|&(_, v)| v >= a) {
            lows.pop_back();
        }
        lows.push_back((steps, a));
        let oldest = steps.saturating_sub(window_steps);
        while highs.front().is_some_and(|&(s, _)| s < oldest) {
            highs.pop_front();
        }
        while lows.front().is_some_and(|&(s, _)| s < oldest) {
            lows.pop_front();
        }
    };
    push(0, state.a(), &mut highs, &mut lows);

    let mut max_mass_drift = (state.mass() - 1.0).abs();
    let mut spread = f64::INFINITY;
    let mut converged = false;
    while state.steps() < max_steps {
        step(&mut state, params, kernel)?;
        let steps = state.steps();
        max_mass_drift = max_mass_drift.max((state.mass() - 1.0).abs());
        push(steps, state.a(), &mut highs, &mut lows);
        if steps.is_multiple_of(stride) {
            history.push(point(&state));
        }
        if steps >= window_steps {
            let hi = highs.front().map_or(0.0, |p| p.1);
            let lo = lows.front().map_or(0.0, |p| p.1);
            spread = (hi - lo) / state.a().abs().max(f64::MIN_POSITIVE);
            if spread <= options.tol {
                converged = true;
                break;
            }
        }
    }
    if history.last().is_some_and(|p| p.t != state.t()) {
        history.push(point(&state));
    }

    let delta_snapped = state.grid().snapped_delta(params.delta);
    let snapped = ModelParams { delta: delta_snapped, ..*params };
    let a_inf = steady_activity(&snapped).ok();
    let l1_distance = stationary_state(&snapped).ok().map(|ss| {
        let n = state.grid().n_cells;
        let cells: f64 = (0..n)
            .map(|k| {
                let (s0, s1) = (k as f64 * ds, (k + 1) as f64 * ds);
                (state.cell(k) * ds - ss.mass_between(s0, s1)).abs()
            })
            .sum();
        cells + (state.tail() - ss.mass_between(n as f64 * ds, f64::INFINITY)).abs()
    });
    let solution = PdeSolution {
        state,
        converged,
        spread,
        window,
        history,
        delta_snapped,
        a_inf,
        l1_distance,
        max_mass_drift,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if converged {
        Ok(solution)
    } else {
        Err(PdeError::NotConverged {
            spread,
            solution: Box::new(solution),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, alpha: f64, delta: f64) -> ModelParams {
        ModelParams::new(mu, alpha, delta).unwrap()
    }

    #[test]
    fn window_width() {
        let k = ExponentialKernel::default();
        assert_eq!(convergence_window(&params(2.0, 0.5, 0.005), &k).unwrap(), 2.5);
        assert_eq!(convergence_window(&params(1e3, 0.5, 0.005), &k).unwrap(), 0.1);
        assert!(convergence_window(&params(0.0, 0.5, 0.005), &k).is_err());
    }

    #[test]
    fn stationary_start_converges_after_one_window() {
        let p = params(2.0, 0.0, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let k = ExponentialKernel::default();
        let state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
        let sol = solve_from(state, &p, &k, &SolveOptions::new(1e-10, 100.0)).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.state.steps(), 25_000);
        assert!(sol.l1_distance.unwrap() < 1e-3);
    }

    #[test]
    fn subcritical_point_converges() {
        let p = params(2.0, 1.0 / 3.0, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let k = ExponentialKernel::default();
        let sol = solve_to_stationarity(&p, &grid, &k, 1e-8, 200.0).unwrap();
        assert!(sol.relative_error().unwrap() < 1e-2, "{sol:?}");
        assert!(sol.max_mass_drift < 1e-6);
        assert!(sol.l1_distance.unwrap() < 1e-2);
    }

    #[test]
    fn supercritical_point_converges_to_saturated_value() {
        let p = params(2.0, 2.0, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let k = ExponentialKernel::default();
        let sol = solve_to_stationarity(&p, &grid, &k, 1e-8, 200.0).unwrap();
        assert!(sol.relative_error().unwrap() < 1e-2);
    }

    #[test]
    fn not_converged_carries_the_partial_run() {
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        let k = ExponentialKernel::default();
        match solve_to_stationarity(&p, &grid, &k, 1e-8, 1.0) {
            Err(PdeError::NotConverged { solution, .. }) => {
                assert!(!solution.converged);
                assert_eq!(solution.state.steps(), 1000);
                assert!(solution.history.len() > 1);
                assert_eq!(solution.history.last().unwrap().t, solution.state.t());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        assert!(solve_to_stationarity(&p, &grid, &k, 0.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_csv_header() {
        let p = params(2.0, 0.0, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        let k = ExponentialKernel::default();
        let state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
        let sol = solve_from(state, &p, &k, &SolveOptions::new(1e-6, 10.0)).unwrap();
        let mut buf = Vec::new();
        sol.write_trajectory_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,a,x,mass\n0,"));
        assert_eq!(text.lines().count(), sol.history.len() + 1);
    }
}
