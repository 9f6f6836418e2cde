//! Thinning sampler.
//!
//! Between two accepted spikes every kernel stage decays by the same factor
//! `exp(-(t - t_ref)/tau)`, so the total `B(t) = sum_i (mu + X_i(t))` (plus
//! the pending first stage for the Erlang kernel) is available in O(1) from
//! the per-stage sums at the last spike. `B` is nonincreasing between spikes
//! and dominates the total intensity regardless of the refractory indicator.
//!
//! A proposal at rate `B(t_prev)` picks neuron `i` with probability
//! `b_i(t_prev) / B(t_prev)` and keeps it with probability
//! `lambda_i(t) / b_i(t_prev)`. Accepted events therefore occur at rate
//! exactly `lambda_i(t)` for every neuron. The bound is refreshed after every
//! proposal; an accepted spike costs O(n) to push the source column into the
//! interaction variables and rebuild the prefix sums used for selection.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{rng_for, Kernel, Network, RecordMeta, Result, SimError, Spike, SpikeRecord, DYNAMICS_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop after this many spikes past the burn-in time.
    MaxSpikes(usize),
    /// Stop at this absolute time.
    MaxTime(f64),
}

impl StopRule {
    fn validate(&self) -> Result<()> {
        match *self {
            StopRule::MaxSpikes(0) => Err(SimError::InvalidStopRule("max_spikes must be positive".into())),
            StopRule::MaxTime(t) if !(t.is_finite() && t > 0.0) => Err(SimError::InvalidStopRule(format!(
                "max_time must be finite and positive, got {t}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub stop: StopRule,
    /// Spikes before this time are recorded but not counted by `MaxSpikes`.
    pub burn_in: f64,
}

impl RunOptions {
    pub fn new(stop: StopRule) -> Self {
        RunOptions { stop, burn_in: 0.0 }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// Dynamic state of the network.
///
/// `x` and `stage` hold the interaction variables and, for the Erlang-2
/// kernel, the first kernel stage, both as of `t_ref` (the last spike).
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    t_ref: f64,
    last_spike: Vec<f64>,
    x: Vec<f64>,
    stage: Vec<f64>,
    prefix_x: Vec<f64>,
    prefix_stage: Vec<f64>,
    /// Bound used for the most recent proposal.
    pub bound: f64,
}

impl SimState {
    fn new(n: usize) -> Self {
        SimState {
            t: 0.0,
            t_ref: 0.0,
            last_spike: vec![f64::NEG_INFINITY; n],
            x: vec![0.0; n],
            stage: vec![0.0; n],
            prefix_x: vec![0.0; n],
            prefix_stage: vec![0.0; n],
            bound: 0.0,
        }
    }

    /// Age `S_i(t)`; `+inf` for a neuron that never fired.
    pub fn age(&self, i: usize) -> f64 {
        self.t - self.last_spike[i]
    }

    /// Interaction variable `X_i` at the current time.
    pub fn interaction(&self, i: usize, tau: f64) -> f64 {
        let u = self.t - self.t_ref;
        (-u / tau).exp() * (self.x[i] + self.stage[i] * u / tau)
    }

    fn sum_x(&self) -> f64 {
        self.prefix_x.last().copied().unwrap_or(0.0)
    }

    fn sum_stage(&self) -> f64 {
        self.prefix_stage.last().copied().unwrap_or(0.0)
    }

    fn rebuild_prefix(&mut self) {
        let mut acc = 0.0;
        for (p, x) in self.prefix_x.iter_mut().zip(&self.x) {
            acc += x;
            *p = acc;
        }
        let mut acc = 0.0;
        for (p, y) in self.prefix_stage.iter_mut().zip(&self.stage) {
            acc += y;
            *p = acc;
        }
    }
}

/// Relative tolerance when checking a candidate's intensity against its bound.
const BOUND_SLACK: f64 = 1e-12;
/// Allowed relative drift between incrementally updated and summed totals.
const DRIFT_TOL: f64 = 1e-6;

pub fn simulate(network: &Network, stop: StopRule) -> Result<SpikeRecord> {
    simulate_with(network, &RunOptions::new(stop))
}

pub fn simulate_with(network: &Network, options: &RunOptions) -> Result<SpikeRecord> {
    options.stop.validate()?;
    if !(options.burn_in.is_finite() && options.burn_in >= 0.0) {
        return Err(SimError::InvalidStopRule(format!(
            "burn_in must be finite and >= 0, got {}",
            options.burn_in
        )));
    }
    let started = Instant::now();
    let config = network.config();
    let n = config.n;
    let (mu, delta) = (config.mu, config.delta);
    let tau = config.kernel.tau();
    let erlang = matches!(config.kernel, Kernel::Erlang2 { .. });
    // Jump of X (or of the first Erlang stage) per unit weight.
    let jump = 1.0 / (n as f64 * tau);
    let uniform_mass = n as f64 * mu;

    let mut rng = rng_for(config.seed, DYNAMICS_STREAM);
    let mut state = SimState::new(n);
    let mut events = Vec::new();
    let mut counted = 0usize;
    let mut proposals = 0u64;
    let mut exhausted = false;
    let (mut inc_x, mut inc_stage) = (0.0f64, 0.0f64);
    let drift_period = 10 * n as u64;

    loop {
        let u_prev = state.t - state.t_ref;
        let decay_prev = (-u_prev / tau).exp();
        let stage_gain_prev = 1.0 + u_prev / tau;
        let mass_x = decay_prev * state.sum_x();
        let mass_stage = decay_prev * stage_gain_prev * state.sum_stage();
        let bound = uniform_mass + mass_x + mass_stage;
        state.bound = bound;
        if !(bound > 0.0) {
            exhausted = true;
            break;
        }

        let wait = Exp::new(bound)
            .map_err(|e| SimError::BoundViolation(format!("invalid bound {bound}: {e}")))?
            .sample(&mut rng);
        let t_next = state.t + wait;
        if let StopRule::MaxTime(t_max) = options.stop {
            if t_next > t_max {
                state.t = t_max;
                break;
            }
        }
        proposals += 1;

        let pick = rng.random::<f64>() * bound;
        let i = if pick < uniform_mass {
            ((pick / mu) as usize).min(n - 1)
        } else if pick - uniform_mass < mass_x || !erlang {
            let target = (pick - uniform_mass) / decay_prev;
            state.prefix_x.partition_point(|&c| c <= target).min(n - 1)
        } else {
            let target = (pick - uniform_mass - mass_x) / (decay_prev * stage_gain_prev);
            state.prefix_stage.partition_point(|&c| c <= target).min(n - 1)
        };

        let candidate_bound = mu + decay_prev * (state.x[i] + state.stage[i] * stage_gain_prev);
        let u = t_next - state.t_ref;
        let decay = (-u / tau).exp();
        let drive = mu + decay * (state.x[i] + state.stage[i] * u / tau);
        if drive > candidate_bound * (1.0 + BOUND_SLACK) {
            return Err(SimError::BoundViolation(format!(
                "neuron {i} at t = {t_next}: intensity {drive} exceeds bound {candidate_bound}"
            )));
        }
        state.t = t_next;
        if t_next - state.last_spike[i] < delta {
            continue;
        }
        if rng.random::<f64>() * candidate_bound >= drive {
            continue;
        }

        // Accepted spike of neuron i.
        events.push(Spike {
            time: t_next,
            neuron: i as u32,
        });
        state.last_spike[i] = t_next;
        let column = network.column(i);
        let carry = u / tau;
        if erlang {
            for ((x, y), w) in state.x.iter_mut().zip(state.stage.iter_mut()).zip(column) {
                *x = decay * (*x + *y * carry);
                *y = decay * *y + w * jump;
            }
            inc_x = decay * (inc_x + inc_stage * carry);
            inc_stage = decay * inc_stage + network.column_sum(i) * jump;
        } else {
            for (x, w) in state.x.iter_mut().zip(column) {
                *x = decay * *x + w * jump;
            }
            inc_x = decay * inc_x + network.column_sum(i) * jump;
        }
        state.t_ref = t_next;
        state.rebuild_prefix();

        if (events.len() as u64).is_multiple_of(drift_period) {
            check_drift(inc_x, state.sum_x(), t_next)?;
            check_drift(inc_stage, state.sum_stage(), t_next)?;
            inc_x = state.sum_x();
            inc_stage = state.sum_stage();
        }

        if t_next > options.burn_in {
            counted += 1;
        }
        if let StopRule::MaxSpikes(k) = options.stop {
            if counted >= k {
                break;
            }
        }
    }

    let accepted = events.len() as u64;
    let meta = RecordMeta {
        config: config.clone(),
        seed: config.seed,
        options: *options,
        end_time: state.t,
        proposals,
        accepted,
        acceptance_rate: if proposals > 0 {
            accepted as f64 / proposals as f64
        } else {
            0.0
        },
        exhausted,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(SpikeRecord { events, meta })
}

fn check_drift(incremental: f64, full: f64, t: f64) -> Result<()> {
    let scale = incremental.abs().max(full.abs());
    if scale > 0.0 && (incremental - full).abs() > DRIFT_TOL * scale {
        return Err(SimError::BoundViolation(format!(
            "bound drift at t = {t}: incremental {incremental} vs summed {full}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_network, NetworkConfig};

    fn run(cfg: &NetworkConfig, stop: StopRule) -> SpikeRecord {
        simulate(&build_network(cfg).unwrap(), stop).unwrap()
    }

    #[test]
    fn single_poisson_neuron_count() {
        let rec = run(&NetworkConfig::dirac(1, 2.0, 0.0, 0.0, 11), StopRule::MaxTime(1000.0));
        let count = rec.events.len() as f64;
        assert!((count - 2000.0).abs() < 3.0 * 2000f64.sqrt(), "{count}");
        assert_eq!(rec.meta.acceptance_rate, 1.0);
        assert_eq!(rec.meta.end_time, 1000.0);
    }

    #[test]
    fn refractoriness_and_ordering() {
        let cfg = NetworkConfig::dirac(20, 50.0, 1.5, 0.01, 3);
        let rec = run(&cfg, StopRule::MaxSpikes(20_000));
        assert_eq!(rec.events.len(), 20_000);
        assert!(rec.events.windows(2).all(|w| w[1].time > w[0].time));
        rec.check_refractory(cfg.delta).unwrap();
    }

    #[test]
    fn erlang_kernel_runs_and_respects_refractoriness() {
        let cfg = NetworkConfig::dirac(50, 5.0, 0.8, 0.005, 8).with_kernel(Kernel::Erlang2 { tau: 0.02 });
        let rec = run(&cfg, StopRule::MaxSpikes(20_000));
        rec.check_refractory(cfg.delta).unwrap();
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = NetworkConfig::dirac(100, 2.0, 0.5, 0.005, 42);
        let a = run(&cfg, StopRule::MaxSpikes(3000));
        let b = run(&cfg, StopRule::MaxSpikes(3000));
        assert_eq!(a.events, b.events);
        let c = run(&cfg.clone().with_seed(43), StopRule::MaxSpikes(3000));
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn zero_drive_exhausts() {
        let rec = run(&NetworkConfig::dirac(5, 0.0, 1.0, 0.0, 1), StopRule::MaxSpikes(10));
        assert!(rec.events.is_empty());
        assert!(rec.meta.exhausted);
    }

    #[test]
    fn burn_in_spikes_not_counted() {
        let cfg = NetworkConfig::dirac(10, 10.0, 0.0, 0.0, 5);
        let net = build_network(&cfg).unwrap();
        let rec = simulate_with(&net, &RunOptions::new(StopRule::MaxSpikes(100)).with_burn_in(5.0)).unwrap();
        let after = rec.events.iter().filter(|s| s.time > 5.0).count();
        assert_eq!(after, 100);
        assert!(rec.events.len() > 300);
    }

    #[test]
    fn invalid_stop_rules() {
        let net = build_network(&NetworkConfig::dirac(2, 1.0, 0.0, 0.0, 1)).unwrap();
        for stop in [StopRule::MaxSpikes(0), StopRule::MaxTime(0.0), StopRule::MaxTime(f64::NAN)] {
            assert!(matches!(simulate(&net, stop), Err(SimError::InvalidStopRule(_))));
        }
        let opts = RunOptions::new(StopRule::MaxSpikes(1)).with_burn_in(-1.0);
        assert!(simulate_with(&net, &opts).is_err());
    }

    #[test]
    fn state_accessors() {
        let mut state = SimState::new(2);
        assert_eq!(state.age(0), f64::INFINITY);
        state.x[1] = 2.0;
        state.t = 0.02;
        let x = state.interaction(1, 0.02);
        assert!((x - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }
}
