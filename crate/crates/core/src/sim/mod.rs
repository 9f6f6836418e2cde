//! Event-driven simulation of finite age-dependent Hawkes networks.
//!
//! Neuron `i` fires with intensity `(mu + X_i(t)) * 1{S_i(t-) >= delta}`
//! where `S_i` is its age and `X_i` the kernel-filtered, `1/n`-scaled input
//! from the network. Events are drawn exactly by thinning against the total
//! of `mu + X_i` (see [`engine`]).

mod config;
pub mod engine;
mod estimate;
mod network;
mod record;

pub use config::{Kernel, NetworkConfig, WeightLaw};
pub use engine::{simulate, simulate_with, RunOptions, SimState, StopRule};
pub use estimate::{estimate_activity, ActivityEstimate, EstimationScheme, BATCHES};
pub use network::{build_network, Network};
pub use record::{read_spikes_csv, RecordMeta, Spike, SpikeRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("InvalidStopRule: {0}")]
    InvalidStopRule(String),
    #[error("BoundViolation: {0}")]
    BoundViolation(String),
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
}

impl SimError {
    pub fn name(&self) -> &'static str {
        match self {
            SimError::InvalidConfig(_) => "InvalidConfig",
            SimError::InvalidStopRule(_) => "InvalidStopRule",
            SimError::BoundViolation(_) => "BoundViolation",
            SimError::InsufficientData(_) => "InsufficientData",
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

const WEIGHT_STREAM: u64 = 0;
const DYNAMICS_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of replicate `index` in a sweep.
pub fn run_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}
