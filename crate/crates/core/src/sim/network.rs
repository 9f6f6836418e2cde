use rand_chacha::ChaCha8Rng;

use super::{rng_for, NetworkConfig, Result, WEIGHT_STREAM};

/// Static part of a simulation: configuration and sampled weight matrix.
///
/// Weights are stored by source neuron: `column(j)[i]` is `alpha_ij`, the
/// weight of neuron `j`'s spikes onto neuron `i`. A spike of `j` touches
/// exactly that contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    weights: Vec<f64>,
    column_sums: Vec<f64>,
}

pub fn build_network(config: &NetworkConfig) -> Result<Network> {
    config.validate()?;
    let n = config.n;
    let sampler = config.weight_law.sampler();
    let mut rng: ChaCha8Rng = rng_for(config.seed, WEIGHT_STREAM);
    // Row-major draw order (i, then j), stored transposed.
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            weights[j * n + i] = sampler.sample(&mut rng);
        }
    }
    let column_sums = weights.chunks_exact(n).map(|c| c.iter().sum()).collect();
    Ok(Network {
        config: config.clone(),
        weights,
        column_sums,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// `alpha_ij`: influence of neuron `j` on neuron `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.config.n + i]
    }

    /// Outgoing weights of neuron `j`, indexed by target.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.config.n;
        &self.weights[j * n..(j + 1) * n]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.column_sums[j]
    }

    pub fn mean_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }
}
