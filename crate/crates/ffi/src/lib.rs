//! C ABI over the agehawkes engines.
//!
//! Every fallible function returns an [`AhStatus`] and writes its results
//! through out-pointers. On failure the message is kept per thread and can be
//! read with [`ah_last_error`]. Panics are caught at the boundary and reported
//! as `AH_STATUS_PANIC`.
//!
//! Simulation records and PDE solvers are opaque handles owned by the caller
//! and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use agehawkes::analytics::{self, AnalyticsError};
use agehawkes::pde::{self, ExponentialKernel, InitialDensity, PdeError, PdeGrid, PdeState, SolveOptions};
use agehawkes::sim::{self, EstimationScheme, Kernel, NetworkConfig, RunOptions, SimError, SpikeRecord, StopRule, WeightLaw};
use agehawkes::ModelParams;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Divergent = 3,
    BracketFailure = 4,
    InvalidConfig = 5,
    InvalidStopRule = 6,
    BoundViolation = 7,
    InsufficientData = 8,
    InvalidGrid = 9,
    InvalidInitialDensity = 10,
    NonFiniteState = 11,
    NotConverged = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AhWeightLaw {
    /// Every weight equals `alpha`.
    Dirac = 0,
    /// Weight 1 with probability `alpha`.
    Bernoulli = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AhInit {
    /// All mass at age `delta + 5 / (mu + 1)`.
    Default = 0,
    /// Fixed point of the discretized equation.
    Stationary = 1,
    /// Cell averages of the exact stationary density.
    Analytic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhSimConfig {
    pub n: usize,
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Time constant of the exponential kernel.
    pub kernel_tau: f64,
    pub seed: u64,
    pub weight_law: AhWeightLaw,
}

/// Spike record of one simulation run.
pub struct AhRecord {
    record: SpikeRecord,
    n: usize,
}

/// PDE solver state with its parameters.
pub struct AhPde {
    params: ModelParams,
    kernel: ExponentialKernel,
    state: PdeState,
}

struct Failure {
    status: AhStatus,
    message: String,
}

impl Failure {
    fn null(what: &str) -> Self {
        Failure {
            status: AhStatus::NullPointer,
            message: format!("{what} is null"),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        let status = match e {
            AnalyticsError::InvalidParams(_) => AhStatus::InvalidParams,
            AnalyticsError::Divergent { .. } => AhStatus::Divergent,
            AnalyticsError::BracketFailure { .. } => AhStatus::BracketFailure,
        };
        Failure { status, message: e.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::InvalidConfig(_) => AhStatus::InvalidConfig,
            SimError::InvalidStopRule(_) => AhStatus::InvalidStopRule,
            SimError::BoundViolation(_) => AhStatus::BoundViolation,
            SimError::InsufficientData(_) => AhStatus::InsufficientData,
        };
        Failure { status, message: e.to_string() }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        let status = match e {
            PdeError::InvalidGrid(_) => AhStatus::InvalidGrid,
            PdeError::InvalidInitialDensity(_) => AhStatus::InvalidInitialDensity,
            PdeError::NonFiniteState(_) => AhStatus::NonFiniteState,
            PdeError::NotConverged { .. } => AhStatus::NotConverged,
        };
        Failure { status, message: e.to_string() }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AhStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AhStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("Panic: {message}"));
            AhStatus::Panic
        }
    }
}

/// Writes through an out-pointer, failing on null.
unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

fn params(mu: f64, alpha: f64, delta: f64) -> Result<ModelParams, Failure> {
    Ok(ModelParams::new(mu, alpha, delta)?)
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn ah_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Name of a status code, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn ah_status_name(status: AhStatus) -> *const c_char {
    let name: &'static str = match status {
        AhStatus::Ok => "Ok\0",
        AhStatus::NullPointer => "NullPointer\0",
        AhStatus::InvalidParams => "InvalidParams\0",
        AhStatus::Divergent => "Divergent\0",
        AhStatus::BracketFailure => "BracketFailure\0",
        AhStatus::InvalidConfig => "InvalidConfig\0",
        AhStatus::InvalidStopRule => "InvalidStopRule\0",
        AhStatus::BoundViolation => "BoundViolation\0",
        AhStatus::InsufficientData => "InsufficientData\0",
        AhStatus::InvalidGrid => "InvalidGrid\0",
        AhStatus::InvalidInitialDensity => "InvalidInitialDensity\0",
        AhStatus::NonFiniteState => "NonFiniteState\0",
        AhStatus::NotConverged => "NotConverged\0",
        AhStatus::Panic => "Panic\0",
    };
    name.as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ah_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_steady_activity(mu: f64, alpha: f64, delta: f64, out: *mut f64) -> AhStatus {
    guard(|| put(out, analytics::steady_activity(&params(mu, alpha, delta)?)?, "out"))
}

/// Stationary activity and interaction value.
///
/// # Safety
/// `out_a` and `out_x` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ah_stationary_state(
    mu: f64,
    alpha: f64,
    delta: f64,
    out_a: *mut f64,
    out_x: *mut f64,
) -> AhStatus {
    guard(|| {
        let s = analytics::stationary_state(&params(mu, alpha, delta)?)?;
        put(out_a, s.a_inf, "out_a")?;
        put(out_x, s.x_inf, "out_x")
    })
}

/// Sensitivity in terms of `(alpha, beta = mu delta)`; `inf` at the critical
/// point `alpha = 1, beta = 0`.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_sensitivity(alpha: f64, beta: f64, out: *mut f64) -> AhStatus {
    guard(|| put(out, analytics::sensitivity_reduced(alpha, beta)?, "out"))
}

/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_sensitivity_derivative(alpha: f64, beta: f64, out: *mut f64) -> AhStatus {
    guard(|| put(out, analytics::sensitivity_derivative(alpha, beta)?, "out"))
}

/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_alpha_m(beta: f64, out: *mut f64) -> AhStatus {
    guard(|| put(out, analytics::alpha_m(beta)?, "out"))
}

/// Limits of the steady activity as `mu -> 0` and `mu -> inf`.
///
/// # Safety
/// `out_low` and `out_high` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ah_activity_limits(alpha: f64, delta: f64, out_low: *mut f64, out_high: *mut f64) -> AhStatus {
    guard(|| {
        let (low, high) = analytics::activity_limits(alpha, delta)?;
        put(out_low, low, "out_low")?;
        put(out_high, high, "out_high")
    })
}

/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_critical_taylor(mu: f64, delta: f64, out: *mut f64) -> AhStatus {
    guard(|| put(out, analytics::critical_taylor(mu, delta)?, "out"))
}

/// Fills `out` with n = 1000, tau = 0.02, seed 1, Dirac weights and zero
/// model parameters.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_sim_config_default(out: *mut AhSimConfig) -> AhStatus {
    guard(|| {
        put(
            out,
            AhSimConfig {
                n: 1000,
                mu: 0.0,
                alpha: 0.0,
                delta: 0.0,
                kernel_tau: Kernel::DEFAULT_TAU,
                seed: 1,
                weight_law: AhWeightLaw::Dirac,
            },
            "out",
        )
    })
}

/// Runs one simulation. Stops after `max_spikes` spikes past `burn_in` if
/// `max_spikes > 0`, otherwise at time `max_time`. On success `*out` owns a
/// new record.
///
/// # Safety
/// `config` must be null or point to a valid config; `out` must be null or
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_simulate(
    config: *const AhSimConfig,
    max_spikes: usize,
    max_time: f64,
    burn_in: f64,
    out: *mut *mut AhRecord,
) -> AhStatus {
    guard(|| {
        let c = get(config, "config")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let weight_law = match c.weight_law {
            AhWeightLaw::Dirac => WeightLaw::Dirac { value: c.alpha },
            AhWeightLaw::Bernoulli => WeightLaw::Bernoulli { p: c.alpha },
        };
        let network = sim::build_network(&NetworkConfig {
            n: c.n,
            mu: c.mu,
            delta: c.delta,
            weight_law,
            kernel: Kernel::Exponential { tau: c.kernel_tau },
            seed: c.seed,
        })?;
        let stop = if max_spikes > 0 {
            StopRule::MaxSpikes(max_spikes)
        } else {
            StopRule::MaxTime(max_time)
        };
        let record = sim::simulate_with(&network, &RunOptions::new(stop).with_burn_in(burn_in))?;
        out.write(Box::into_raw(Box::new(AhRecord { record, n: c.n })));
        Ok(())
    })
}

/// Number of spikes in the record, 0 for null.
///
/// # Safety
/// `record` must be null or a live record.
#[no_mangle]
pub unsafe extern "C" fn ah_record_len(record: *const AhRecord) -> usize {
    record.as_ref().map_or(0, |r| r.record.len())
}

/// Copies up to `capacity` spikes, in time order, into `times` and
/// `neurons`; the count copied goes to `out_copied`.
///
/// # Safety
/// `record` must be a live record; `times` and `neurons` must be valid for
/// `capacity` writes; `out_copied` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_record_spikes(
    record: *const AhRecord,
    times: *mut f64,
    neurons: *mut u32,
    capacity: usize,
    out_copied: *mut usize,
) -> AhStatus {
    guard(|| {
        let r = get(record, "record")?;
        if times.is_null() || neurons.is_null() {
            return Err(Failure::null("times or neurons"));
        }
        let count = capacity.min(r.record.len());
        for (i, spike) in r.record.events.iter().take(count).enumerate() {
            times.add(i).write(spike.time);
            neurons.add(i).write(spike.neuron);
        }
        put(out_copied, count, "out_copied")
    })
}

/// Rate per neuron over the first `k` spikes after `burn_in`, with its
/// batch-means standard error.
///
/// # Safety
/// `record` must be a live record; out-pointers must be null or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ah_record_estimate(
    record: *const AhRecord,
    k: usize,
    burn_in: f64,
    out_rate: *mut f64,
    out_std_error: *mut f64,
) -> AhStatus {
    guard(|| {
        let r = get(record, "record")?;
        let est = sim::estimate_activity(&r.record, r.n, EstimationScheme::FirstK { k, burn_in })?;
        put(out_rate, est.rate, "out_rate")?;
        put(out_std_error, est.std_error, "out_std_error")
    })
}

/// Fraction of thinning proposals that became spikes.
///
/// # Safety
/// `record` must be a live record; `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_record_acceptance_rate(record: *const AhRecord, out: *mut f64) -> AhStatus {
    guard(|| put(out, get(record, "record")?.record.meta.acceptance_rate, "out"))
}

/// # Safety
/// `record` must be null or a record not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ah_record_free(record: *mut AhRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// New PDE solver on the default grid for these parameters (ages up to
/// `delta + 20 / (mu + alpha a_inf)`).
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ah_pde_new(
    mu: f64,
    alpha: f64,
    delta: f64,
    ds: f64,
    kernel_tau: f64,
    init: AhInit,
    out: *mut *mut AhPde,
) -> AhStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let params = params(mu, alpha, delta)?;
        let kernel = ExponentialKernel::new(kernel_tau)?;
        let grid = PdeGrid::for_params(&params, ds)?;
        let init = match init {
            AhInit::Default => InitialDensity::default_for(&params),
            AhInit::Stationary => InitialDensity::Stationary,
            AhInit::Analytic => InitialDensity::Analytic,
        };
        let state = pde::init_state(&params, &grid, init)?;
        out.write(Box::into_raw(Box::new(AhPde { params, kernel, state })));
        Ok(())
    })
}

/// Advances `steps` time steps of size `ds`.
///
/// # Safety
/// `solver` must be a live solver.
#[no_mangle]
pub unsafe extern "C" fn ah_pde_step(solver: *mut AhPde, steps: u64) -> AhStatus {
    guard(|| {
        let s = get_mut(solver, "solver")?;
        for _ in 0..steps {
            pde::step(&mut s.state, &s.params, &s.kernel)?;
        }
        Ok(())
    })
}

/// Current time, boundary activity, interaction value and total mass.
///
/// # Safety
/// `solver` must be a live solver; out-pointers must be null or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ah_pde_observe(
    solver: *const AhPde,
    out_t: *mut f64,
    out_a: *mut f64,
    out_x: *mut f64,
    out_mass: *mut f64,
) -> AhStatus {
    guard(|| {
        let s = &get(solver, "solver")?.state;
        put(out_t, s.t(), "out_t")?;
        put(out_a, s.a(), "out_a")?;
        put(out_x, s.x(), "out_x")?;
        put(out_mass, s.mass(), "out_mass")
    })
}

/// Steps until the relative spread of the activity over one convergence
/// window is at most `tol`, or until time `max_t`. The solver keeps the final
/// state either way; `AH_STATUS_NOT_CONVERGED` reports the second case.
///
/// # Safety
/// `solver` must be a live solver.
#[no_mangle]
pub unsafe extern "C" fn ah_pde_solve(solver: *mut AhPde, tol: f64, max_t: f64) -> AhStatus {
    guard(|| {
        let s = get_mut(solver, "solver")?;
        let options = SolveOptions::new(tol, max_t);
        match pde::solve_from(s.state.clone(), &s.params, &s.kernel, &options) {
            Ok(solution) => {
                s.state = solution.state;
                Ok(())
            }
            Err(PdeError::NotConverged { spread, solution }) => {
                s.state = solution.state.clone();
                Err(PdeError::NotConverged { spread, solution }.into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// # Safety
/// `solver` must be null or a solver not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ah_pde_free(solver: *mut AhPde) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}
