use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ExponentialKernel, PdeError, PdeGrid, Result};
use crate::analytics::{stationary_state, ModelParams};

/// Rescale the lazily decayed cells once the common factor gets this small.
const GAIN_FLOOR: f64 = 1e-150;
const MIN_RESYNC_STEPS: usize = 1024;
const FIXED_POINT_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDensity {
    /// All mass at age `s0`.
    DeltaAtAge { s0: f64 },
    /// Uniform on `[s0, s1)`.
    Uniform { s0: f64, s1: f64 },
    /// Stationary solution of the discretized equation, with `x` at its
    /// stationary value.
    Stationary,
    /// Cell averages of the exact stationary density, with `x = x_inf`.
    Analytic,
}

impl InitialDensity {
    /// All mass at age `delta + 5 / (mu + 1)`.
    pub fn default_for(params: &ModelParams) -> Self {
        InitialDensity::DeltaAtAge {
            s0: params.delta + 5.0 / (params.mu + 1.0),
        }
    }
}

/// Age density on a grid, plus the interaction and boundary activity.
///
/// Cells past the refractory period all lose the same fraction of their mass
/// each step, so they are stored divided by a running product of the decay
/// factors (`gain`). A step then touches a constant number of cells. The
/// oldest cell leaves into `tail` every step, in the same scaled units.
#[derive(Debug, Clone)]
pub struct PdeState {
    grid: PdeGrid,
    refractory: usize,
    cells: Vec<f64>,
    head: usize,
    gain: f64,
    refractory_sum: f64,
    active_sum: f64,
    tail: f64,
    x: f64,
    a: f64,
    steps: u64,
    since_resync: usize,
}

pub fn init_state(params: &ModelParams, grid: &PdeGrid, init: InitialDensity) -> Result<PdeState> {
    params
        .validate()
        .map_err(|e| PdeError::InvalidGrid(e.to_string()))?;
    grid.check_for(params)?;
    let n = grid.n_cells;
    let ds = grid.ds;
    let k = grid.refractory_cells(params.delta);
    let span = n as f64 * ds;
    let mut cells = vec![0.0; n];
    let mut tail = 0.0;
    let mut x = 0.0;
    match init {
        InitialDensity::DeltaAtAge { s0 } => {
            if !(s0.is_finite() && s0 >= 0.0) {
                return Err(PdeError::InvalidInitialDensity(format!("age {s0} is not a finite nonnegative number")));
            }
            let idx = (s0 / ds).floor();
            if idx < n as f64 {
                cells[idx as usize] = 1.0 / ds;
            } else {
                tail = 1.0;
            }
        }
        InitialDensity::Uniform { s0, s1 } => {
            if !(s0.is_finite() && s1.is_finite() && s0 >= 0.0 && s1 > s0) {
                return Err(PdeError::InvalidInitialDensity(format!("[{s0}, {s1}) is not a nonempty age interval")));
            }
            let height = 1.0 / (s1 - s0);
            let first = (s0 / ds).floor() as usize;
            for (idx, cell) in cells.iter_mut().enumerate().skip(first) {
                let lo = (idx as f64 * ds).max(s0);
                let hi = ((idx + 1) as f64 * ds).min(s1);
                if hi <= lo {
                    break;
                }
                *cell = height * (hi - lo) / ds;
            }
            if s1 > span {
                tail = height * (s1 - s0.max(span));
            }
        }
        InitialDensity::Stationary => {
            let rate_of = |a: f64| params.mu + params.alpha * a;
            let a = discrete_fixed_point(params, ds, k)?;
            let r = rate_of(a);
            for (idx, cell) in cells.iter_mut().enumerate() {
                *cell = if idx < k { a } else { a * (-r * ds * (idx - k) as f64).exp() };
            }
            tail = a * ds * (-r * ds * (n - k) as f64).exp() / -(-r * ds).exp_m1();
            x = params.alpha * a;
        }
        InitialDensity::Analytic => {
            let exact = stationary_state(params).map_err(|e| PdeError::InvalidInitialDensity(e.to_string()))?;
            for (idx, cell) in cells.iter_mut().enumerate() {
                *cell = exact.mass_between(idx as f64 * ds, (idx + 1) as f64 * ds) / ds;
            }
            tail = exact.mass_between(span, f64::INFINITY);
            x = exact.x_inf;
        }
    }
    let mass = cells.iter().sum::<f64>() * ds + tail;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(PdeError::InvalidInitialDensity("initial density has no mass".into()));
    }
    cells.iter_mut().for_each(|c| *c /= mass);
    tail /= mass;
    if init == InitialDensity::Stationary {
        x = params.alpha * cells[0];
    }
    let mut state = PdeState {
        grid: *grid,
        refractory: k,
        a: cells[0],
        cells,
        head: 0,
        gain: 1.0,
        refractory_sum: 0.0,
        active_sum: 0.0,
        tail,
        x,
        steps: 0,
        since_resync: 0,
    };
    state.resync();
    Ok(state)
}

/// Boundary activity of the discrete scheme at rest: the positive root of
/// `a = 1 / (k ds + ds / (1 - exp(-(mu + alpha a) ds)))`.
fn discrete_fixed_point(params: &ModelParams, ds: f64, k: usize) -> Result<f64> {
    let image = |a: f64| {
        let r = params.mu + params.alpha * a;
        let escape = -(-r * ds).exp_m1();
        escape / (k as f64 * ds * escape + ds)
    };
    // image(a) < 1 / ((k + 1) ds), so the upper end is above the root.
    let (mut lo, mut hi) = (0.0, 1.0 / ((k + 1) as f64 * ds));
    for _ in 0..FIXED_POINT_ITER {
        let mid = 0.5 * (lo + hi);
        if mid - image(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    if !(a > 0.0) {
        return Err(PdeError::InvalidInitialDensity(
            "no stationary density with positive activity for these parameters".into(),
        ));
    }
    Ok(a)
}

/// Advances the state by one time step `dt = ds`.
pub fn step(state: &mut PdeState, params: &ModelParams, kernel: &ExponentialKernel) -> Result<()> {
    let k = state.grid.refractory_cells(params.delta);
    if k != state.refractory {
        return Err(PdeError::InvalidGrid(format!(
            "state was built for {} refractory cells, parameters give {k}",
            state.refractory
        )));
    }
    let n = state.grid.n_cells;
    let ds = state.grid.ds;

    // firing out of the non-refractory cells, exact over the step
    let rate = params.mu + state.x;
    let decay_m1 = (-rate * ds).exp_m1();
    let active = state.gain * (state.active_sum * ds + state.tail);
    let lost = -decay_m1 * active;
    state.gain *= 1.0 + decay_m1;

    // shift by one cell: the oldest cell joins the tail, cell k - 1 leaves
    // the refractory block
    let oldest = (state.head + n - 1) % n;
    let v = state.cells[oldest];
    state.tail += v * ds;
    state.active_sum -= v;
    if k > 0 {
        let idx = (state.head + k - 1) % n;
        let v = state.cells[idx];
        state.refractory_sum -= v;
        let scaled = v / state.gain;
        state.cells[idx] = scaled;
        state.active_sum += scaled;
    }
    state.head = oldest;
    let born = lost / ds;
    if k > 0 {
        state.cells[oldest] = born;
        state.refractory_sum += born;
    } else {
        let scaled = born / state.gain;
        state.cells[oldest] = scaled;
        state.active_sum += scaled;
    }

    state.a = born;
    let target = params.alpha * born;
    state.x = target + (state.x - target) * (-ds / kernel.tau).exp();
    state.steps += 1;

    if state.gain < GAIN_FLOOR {
        state.rescale();
    }
    state.since_resync += 1;
    if state.since_resync >= n.max(MIN_RESYNC_STEPS) {
        state.resync();
    }
    if !(state.a.is_finite() && state.x.is_finite() && state.active_sum.is_finite() && state.gain > 0.0) {
        return Err(PdeError::NonFiniteState(format!(
            "a = {}, x = {} at t = {}",
            state.a,
            state.x,
            state.t()
        )));
    }
    Ok(())
}

impl PdeState {
    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.steps as f64 * self.grid.ds
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Boundary activity `u(t, 0)` produced by the last step.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn refractory_cells(&self) -> usize {
        self.refractory
    }

    /// Mass beyond the grid.
    pub fn tail(&self) -> f64 {
        self.gain * self.tail
    }

    /// Density value of age cell `k`.
    pub fn cell(&self, k: usize) -> f64 {
        let v = self.cells[(self.head + k) % self.grid.n_cells];
        if k < self.refractory {
            v
        } else {
            v * self.gain
        }
    }

    /// Density values in age order.
    pub fn u(&self) -> Vec<f64> {
        (0..self.grid.n_cells).map(|k| self.cell(k)).collect()
    }

    /// Total mass from the running sums; constant time.
    pub fn mass(&self) -> f64 {
        self.refractory_sum * self.grid.ds + self.gain * (self.active_sum * self.grid.ds + self.tail)
    }

    /// Total mass summed cell by cell.
    pub fn mass_exact(&self) -> f64 {
        self.u().iter().sum::<f64>() * self.grid.ds + self.tail()
    }

    fn rescale(&mut self) {
        let n = self.grid.n_cells;
        for k in self.refractory..n {
            self.cells[(self.head + k) % n] *= self.gain;
        }
        self.tail *= self.gain;
        self.gain = 1.0;
        self.resync();
    }

    fn resync(&mut self) {
        let n = self.grid.n_cells;
        let (mut refractory, mut active) = (0.0, 0.0);
        for k in 0..n {
            let v = self.cells[(self.head + k) % n];
            if k < self.refractory {
                refractory += v;
            } else {
                active += v;
            }
        }
        self.refractory_sum = refractory;
        self.active_sum = active;
        self.since_resync = 0;
    }

    /// Writes the `s,u` table at cell midpoints.
    pub fn write_density_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(comment) = comment {
            writeln!(out, "# {comment}")?;
        }
        writeln!(out, "s,u")?;
        let ds = self.grid.ds;
        for k in 0..self.grid.n_cells {
            writeln!(out, "{},{}", (k as f64 + 0.5) * ds, self.cell(k))?;
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::steady_activity;

    fn params(mu: f64, alpha: f64, delta: f64) -> ModelParams {
        ModelParams::new(mu, alpha, delta).unwrap()
    }

    #[test]
    fn initial_densities_have_unit_mass() {
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        for init in [
            InitialDensity::DeltaAtAge { s0: 10.0 * p.delta },
            InitialDensity::DeltaAtAge { s0: 1e3 },
            InitialDensity::Uniform { s0: 0.0123, s1: 0.5 },
            InitialDensity::Uniform { s0: 1.0, s1: 1e3 },
            InitialDensity::Stationary,
            InitialDensity::Analytic,
            InitialDensity::default_for(&p),
        ] {
            let state = init_state(&p, &grid, init).unwrap();
            assert!((state.mass_exact() - 1.0).abs() < 1e-12, "{init:?}");
            assert!((state.mass() - 1.0).abs() < 1e-12, "{init:?}");
            assert!(state.u().iter().all(|&u| u >= 0.0));
        }
        let state = init_state(&p, &grid, InitialDensity::DeltaAtAge { s0: 0.0 }).unwrap();
        assert_eq!(state.x(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        for init in [
            InitialDensity::DeltaAtAge { s0: -1.0 },
            InitialDensity::DeltaAtAge { s0: f64::NAN },
            InitialDensity::Uniform { s0: 0.2, s1: 0.2 },
        ] {
            assert!(matches!(init_state(&p, &grid, init), Err(PdeError::InvalidInitialDensity(_))));
        }
        let short = PdeGrid::new(1e-3, 1.0).unwrap();
        assert!(matches!(init_state(&p, &short, InitialDensity::Stationary), Err(PdeError::InvalidGrid(_))));
        assert!(PdeGrid::new(0.0, 1.0).is_err());
        let divergent = params(1.0, 1.0, 0.0);
        assert!(PdeGrid::for_params(&divergent, 1e-3).is_err());
    }

    #[test]
    fn refractory_mass_does_not_fire() {
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let kernel = ExponentialKernel::default();
        let mut state = init_state(&p, &grid, InitialDensity::Uniform { s0: 0.0, s1: p.delta }).unwrap();
        step(&mut state, &p, &kernel).unwrap();
        assert_eq!(state.a(), 0.0);
    }

    #[test]
    fn single_steps_conserve_mass() {
        let kernel = ExponentialKernel::default();
        for (mu, alpha, delta) in [(2.0, 0.5, 0.005), (2.0, 2.0, 0.005), (0.5, 0.0, 0.0), (1.0, 0.9, 0.0)] {
            let p = params(mu, alpha, delta);
            let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
            let mut state = init_state(&p, &grid, InitialDensity::default_for(&p)).unwrap();
            for i in 0..3000 {
                let before = state.mass_exact();
                step(&mut state, &p, &kernel).unwrap();
                if i % 97 == 0 {
                    let after = state.mass_exact();
                    assert!((after - before).abs() < 1e-14, "{mu} {alpha} {delta}: {before} -> {after}");
                    assert!((state.mass() - after).abs() < 1e-13);
                    assert!(state.u().iter().all(|&u| u >= 0.0));
                    assert!(state.x() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn uncoupled_network_keeps_zero_interaction() {
        let p = params(3.0, 0.0, 0.002);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        let kernel = ExponentialKernel::default();
        let mut state = init_state(&p, &grid, InitialDensity::default_for(&p)).unwrap();
        for _ in 0..5000 {
            step(&mut state, &p, &kernel).unwrap();
            assert_eq!(state.x(), 0.0);
        }
    }

    #[test]
    fn stationary_start_holds_the_discrete_fixed_point() {
        let p = params(2.0, 0.0, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let kernel = ExponentialKernel::default();
        let mut state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
        // oracle: the scheme at rest has a = 1 / (delta + ds / (1 - exp(-mu ds)))
        let fixed = 1.0 / (0.005 + 1e-4 / (1.0 - (-2e-4f64).exp()));
        assert!((state.a() - fixed).abs() < 1e-12);
        for _ in 0..1000 {
            step(&mut state, &p, &kernel).unwrap();
            assert!((state.a() - 1.980198).abs() < 1e-3);
            assert!((state.a() - fixed).abs() < 1e-10);
        }
    }

    #[test]
    fn coupled_stationary_start_is_at_rest() {
        let kernel = ExponentialKernel::default();
        for alpha in [0.5, 1.0, 2.0] {
            let p = params(2.0, alpha, 0.005);
            let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
            let mut state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
            let a0 = state.a();
            let a_inf = steady_activity(&p).unwrap();
            // first-order scheme error
            // first order: the scheme behaves like a refractory period of delta + ds/2
            assert!((a0 - a_inf).abs() / a_inf < 1e-2, "{alpha}: {a0} vs {a_inf}");
            for _ in 0..20_000 {
                step(&mut state, &p, &kernel).unwrap();
            }
            assert!((state.a() - a0).abs() < 1e-9 * a0, "{alpha}: {} vs {a0}", state.a());
        }
    }

    #[test]
    fn converges_from_a_delta_start() {
        // 1e5 steps of 1e-4 from a point mass at age 1
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
        let kernel = ExponentialKernel::default();
        let mut state = init_state(&p, &grid, InitialDensity::DeltaAtAge { s0: 1.0 }).unwrap();
        for _ in 0..100_000 {
            step(&mut state, &p, &kernel).unwrap();
        }
        let a_inf = steady_activity(&p).unwrap();
        assert!((state.a() - a_inf).abs() / a_inf < 5e-3, "{} vs {a_inf}", state.a());
        assert!((state.mass_exact() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_csv_has_one_row_per_cell() {
        let p = params(2.0, 0.5, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-2).unwrap();
        let state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
        let mut buf = Vec::new();
        state.write_density_csv(&mut buf, Some("ds=0.01")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), grid.n_cells + 2);
        assert!(text.starts_with("# ds=0.01\ns,u\n"));
    }
}
