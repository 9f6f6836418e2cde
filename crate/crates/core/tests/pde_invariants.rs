use agehawkes::analytics::steady_activity;
use agehawkes::pde::{
    init_state, solve_from, solve_to_stationarity, step, ExponentialKernel, InitialDensity, PdeGrid, SolveOptions,
};
use agehawkes::ModelParams;

fn params(mu: f64, alpha: f64, delta: f64) -> ModelParams {
    ModelParams::new(mu, alpha, delta).unwrap()
}

fn stationary_error(p: &ModelParams, ds: f64) -> f64 {
    let grid = PdeGrid::for_params(p, ds).unwrap();
    let sol = solve_to_stationarity(p, &grid, &ExponentialKernel::default(), 1e-8, 1000.0).unwrap();
    (sol.a_end() - steady_activity(p).unwrap()).abs()
}

#[test]
fn halving_ds_halves_the_error() {
    let p = params(2.0, 0.5, 0.005);
    let coarse = stationary_error(&p, 1e-4);
    let fine = stationary_error(&p, 5e-5);
    assert!(coarse / fine >= 1.8, "coarse {coarse:e}, fine {fine:e}");
}

#[test]
fn density_stays_nonnegative_and_mass_stays_one() {
    let kernel = ExponentialKernel::default();
    for (mu, alpha) in [(2.0, 0.5), (0.1, 2.0), (20.0, 1.0)] {
        let p = params(mu, alpha, 0.005);
        let grid = PdeGrid::for_params(&p, 1e-3).unwrap();
        let mut state = init_state(&p, &grid, InitialDensity::Uniform { s0: 0.0, s1: 0.3 }).unwrap();
        for i in 0..20_000 {
            step(&mut state, &p, &kernel).unwrap();
            if i % 500 == 0 {
                assert!(state.u().iter().all(|&v| v >= 0.0) && state.tail() >= 0.0);
                assert!((state.mass_exact() - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn mass_drift_over_long_runs() {
    let p = params(0.05, 1.0, 0.005);
    let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
    let sol = solve_to_stationarity(&p, &grid, &ExponentialKernel::default(), 1e-8, 2000.0).unwrap();
    assert!(sol.max_mass_drift < 1e-6, "{}", sol.max_mass_drift);
    assert!(sol.history.iter().all(|pt| (pt.mass - 1.0).abs() < 1e-6));
}

#[test]
fn projected_stationary_density_stays_put() {
    let kernel = ExponentialKernel::default();
    let ds = 1e-4;
    for alpha in [0.0, 0.5, 2.0] {
        let p = params(2.0, alpha, 0.005);
        let a_inf = steady_activity(&p).unwrap();
        let scheme_error = stationary_error(&p, ds);
        let grid = PdeGrid::for_params(&p, ds).unwrap();
        let mut state = init_state(&p, &grid, InitialDensity::Analytic).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..200_000 {
            step(&mut state, &p, &kernel).unwrap();
            worst = worst.max((state.a() - a_inf).abs());
        }
        assert!(worst <= 10.0 * scheme_error, "alpha {alpha}: {worst:e} vs scheme error {scheme_error:e}");
    }
}

#[test]
fn supercritical_converges_to_the_saturated_branch() {
    let p = params(2.0, 2.0, 0.005);
    let a_inf = steady_activity(&p).unwrap();
    let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
    let sol = solve_to_stationarity(&p, &grid, &ExponentialKernel::default(), 1e-8, 1000.0).unwrap();
    assert!(sol.converged);
    assert!(((sol.a_end() - a_inf) / a_inf).abs() < 1e-2);
    assert!(sol.l1_distance.unwrap() < 2e-2);
}

#[test]
fn discrete_stationary_start_converges_within_one_window() {
    let p = params(2.0, 0.0, 0.005);
    let kernel = ExponentialKernel::default();
    let grid = PdeGrid::for_params(&p, 1e-4).unwrap();
    let state = init_state(&p, &grid, InitialDensity::Stationary).unwrap();
    let sol = solve_from(state, &p, &kernel, &SolveOptions::new(1e-8, 100.0)).unwrap();
    assert!(sol.converged);
    assert!(sol.state.t() <= sol.window * (1.0 + 1e-9));
}
