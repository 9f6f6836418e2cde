use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SimError};

/// Law of the i.i.d. synaptic weights. Only nonnegative supports are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightLaw {
    /// Every weight equals `value`.
    Dirac { value: f64 },
    /// Weight 1 with probability `p`, else 0 (Erdős–Rényi graph).
    Bernoulli { p: f64 },
    /// Finite mixture: `values[k]` with probability `probs[k]`.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl WeightLaw {
    pub fn mean(&self) -> f64 {
        match self {
            WeightLaw::Dirac { value } => *value,
            WeightLaw::Bernoulli { p } => *p,
            WeightLaw::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                values.iter().zip(probs).map(|(v, p)| v * p).sum::<f64>() / total
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightLaw::Dirac { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "dirac weight must be finite and >= 0, got {value}"
                    )));
                }
            }
            WeightLaw::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(SimError::InvalidConfig(format!(
                        "bernoulli probability must lie in [0, 1], got {p}"
                    )));
                }
            }
            WeightLaw::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(SimError::InvalidConfig(
                        "discrete law needs matching, non-empty values and probs".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(SimError::InvalidConfig(
                        "discrete law support must be finite and nonnegative".into(),
                    ));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                    || probs.iter().sum::<f64>() <= 0.0
                {
                    return Err(SimError::InvalidConfig(
                        "discrete law probabilities must be nonnegative with positive sum".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn sampler(&self) -> WeightSampler {
        match self {
            WeightLaw::Dirac { value } => WeightSampler::Constant(*value),
            WeightLaw::Bernoulli { p } => WeightSampler::Bernoulli(*p),
            WeightLaw::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p / total;
                        acc
                    })
                    .collect();
                WeightSampler::Discrete {
                    values: values.clone(),
                    cumulative,
                }
            }
        }
    }
}

pub(crate) enum WeightSampler {
    Constant(f64),
    Bernoulli(f64),
    Discrete { values: Vec<f64>, cumulative: Vec<f64> },
}

impl WeightSampler {
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            WeightSampler::Constant(v) => *v,
            WeightSampler::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            WeightSampler::Discrete { values, cumulative } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u).min(values.len() - 1);
                values[k]
            }
        }
    }
}

/// Interaction kernel `h`, normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `h(t) = exp(-t/tau) / tau`.
    Exponential { tau: f64 },
    /// `h(t) = t exp(-t/tau) / tau^2`, realized as two chained exponential stages.
    Erlang2 { tau: f64 },
}

impl Kernel {
    pub const DEFAULT_TAU: f64 = 0.02;

    pub fn tau(&self) -> f64 {
        match *self {
            Kernel::Exponential { tau } | Kernel::Erlang2 { tau } => tau,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { tau } => (-t / tau).exp() / tau,
            Kernel::Erlang2 { tau } => t * (-t / tau).exp() / (tau * tau),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.tau();
        if tau.is_finite() && tau > 0.0 {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!(
                "kernel time constant must be finite and > 0, got {tau}"
            )))
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Exponential {
            tau: Self::DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n: usize,
    pub mu: f64,
    pub delta: f64,
    pub weight_law: WeightLaw,
    pub kernel: Kernel,
    pub seed: u64,
}

impl NetworkConfig {
    /// Network with constant weights `alpha` and the default kernel.
    pub fn dirac(n: usize, mu: f64, alpha: f64, delta: f64, seed: u64) -> Self {
        NetworkConfig {
            n,
            mu,
            delta,
            weight_law: WeightLaw::Dirac { value: alpha },
            kernel: Kernel::default(),
            seed,
        }
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Mean connectivity `alpha = E[alpha_ij]`.
    pub fn alpha(&self) -> f64 {
        self.weight_law.mean()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SimError::InvalidConfig("n must be at least 1".into()));
        }
        if self.n > u32::MAX as usize {
            return Err(SimError::InvalidConfig(format!("n = {} is too large", self.n)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(SimError::InvalidConfig(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        self.weight_law.validate()?;
        self.kernel.validate()
    }
}
