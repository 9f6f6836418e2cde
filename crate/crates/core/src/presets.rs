//! Figure presets: steady activity against `mu` (closed form next to
//! simulation) and sensitivity against `alpha` for a few values of `beta`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{alpha_m, sensitivity_derivative, sensitivity_reduced, steady_activity, AnalyticsError, ModelParams};
use crate::io::fmt_num;
use crate::sim::{
    build_network, estimate_activity, run_seed, simulate_with, EstimationScheme, Kernel, NetworkConfig, RunOptions,
    SimError, StopRule, WeightLaw,
};

/// How the mean connectivity `alpha` is turned into a weight law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    Dirac,
    Bernoulli,
}

impl WeightFamily {
    pub fn law(self, alpha: f64) -> WeightLaw {
        match self {
            WeightFamily::Dirac => WeightLaw::Dirac { value: alpha },
            WeightFamily::Bernoulli => WeightLaw::Bernoulli { p: alpha },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Preset {
    pub delta: f64,
    pub alphas: Vec<f64>,
    pub mus: Vec<f64>,
    pub n: usize,
    pub spikes: usize,
    pub burn_in: f64,
    pub seed: u64,
    /// Independent runs per grid point, averaged.
    pub replicates: usize,
    pub kernel: Kernel,
    pub weights: WeightFamily,
}

/// `alpha = k/3` for `k = 0..=6`.
pub fn fig1_alphas() -> Vec<f64> {
    (0..=6).map(|k| k as f64 / 3.0).collect()
}

impl Default for Fig1Preset {
    fn default() -> Self {
        Fig1Preset {
            delta: 0.005,
            alphas: fig1_alphas(),
            // nine points, two per decade
            mus: (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect(),
            n: 1000,
            spikes: 5000,
            burn_in: 0.0,
            seed: 1,
            replicates: 1,
            kernel: Kernel::default(),
            weights: WeightFamily::Dirac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub mu: f64,
    pub alpha: f64,
    pub a_inf_analytic: f64,
    /// Mean of the replicate estimates.
    pub a_inf_sim: f64,
    /// Standard error of that mean from the replicates' batch-means errors.
    pub sim_se: f64,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub acceptance_rate: f64,
}

pub const FIG1_HEADER: &str = "mu,alpha,a_inf_analytic,a_inf_sim,sim_se,acceptance_rate";

impl Fig1Row {
    pub fn csv(&self) -> String {
        [
            self.mu,
            self.alpha,
            self.a_inf_analytic,
            self.a_inf_sim,
            self.sim_se,
            self.acceptance_rate,
        ]
        .map(fmt_num)
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PresetError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl PresetError {
    pub fn name(&self) -> &'static str {
        match self {
            PresetError::Analytics(e) => e.name(),
            PresetError::Sim(e) => e.name(),
        }
    }
}

/// Grid points in output order: `alpha` outer, `mu` inner.
pub fn fig1_points(preset: &Fig1Preset) -> Vec<(f64, f64)> {
    preset
        .alphas
        .iter()
        .flat_map(|&alpha| preset.mus.iter().map(move |&mu| (mu, alpha)))
        .collect()
}

/// One grid point. Replicate `r` of point `p` runs with seed
/// `seed ^ (p * replicates + r)`.
pub fn fig1_point(preset: &Fig1Preset, index: usize) -> Result<Fig1Row, PresetError> {
    let (mu, alpha) = fig1_points(preset)[index];
    let params = ModelParams::new(mu, alpha, preset.delta)?;
    let a_inf_analytic = steady_activity(&params)?;
    let replicates = preset.replicates.max(1);
    let mut rates = Vec::with_capacity(replicates);
    let mut seeds = Vec::with_capacity(replicates);
    let (mut var_sum, mut acceptance) = (0.0, 0.0);
    for r in 0..replicates {
        let seed = run_seed(preset.seed, (index * replicates + r) as u64);
        let config = NetworkConfig {
            n: preset.n,
            mu,
            delta: preset.delta,
            weight_law: preset.weights.law(alpha),
            kernel: preset.kernel,
            seed,
        };
        let network = build_network(&config)?;
        let options = RunOptions::new(StopRule::MaxSpikes(preset.spikes)).with_burn_in(preset.burn_in);
        let record = simulate_with(&network, &options)?;
        let scheme = EstimationScheme::FirstK {
            k: preset.spikes,
            burn_in: preset.burn_in,
        };
        let est = estimate_activity(&record, preset.n, scheme)?;
        rates.push(est.rate);
        seeds.push(seed);
        var_sum += est.std_error * est.std_error;
        acceptance += record.meta.acceptance_rate;
    }
    let count = replicates as f64;
    Ok(Fig1Row {
        mu,
        alpha,
        a_inf_analytic,
        a_inf_sim: rates.iter().sum::<f64>() / count,
        sim_se: var_sum.sqrt() / count,
        rates,
        seeds,
        acceptance_rate: acceptance / count,
    })
}

/// All grid points, in parallel on the current rayon pool; rows come back in
/// grid order.
pub fn fig1_rows(preset: &Fig1Preset) -> Result<Vec<Fig1Row>, PresetError> {
    (0..fig1_points(preset).len())
        .into_par_iter()
        .map(|i| fig1_point(preset, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Preset {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for Fig2Preset {
    fn default() -> Self {
        Fig2Preset {
            betas: vec![0.0, 0.01, 0.2, 0.5, 0.6],
            alphas: (0..=200).map(|k| k as f64 / 100.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub alpha: f64,
    pub beta: f64,
    /// `inf` at the critical point `alpha = 1, beta = 0`.
    pub sigma: f64,
}

pub const FIG2_HEADER: &str = "alpha,beta,sigma";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMarker {
    pub beta: f64,
    pub alpha_m: f64,
    /// `inf` at `beta = 0`.
    pub sigma_max: f64,
    /// Undefined (NaN) at `beta = 0`.
    pub g_residual: f64,
}

pub const ALPHA_M_HEADER: &str = "beta,alpha_m,sigma_max,g_residual";

impl AlphaMarker {
    pub fn new(beta: f64) -> Result<Self, AnalyticsError> {
        let alpha_m = alpha_m(beta)?;
        Ok(AlphaMarker {
            beta,
            alpha_m,
            sigma_max: sensitivity_reduced(alpha_m, beta)?,
            g_residual: sensitivity_derivative(alpha_m, beta)?,
        })
    }

    pub fn csv(&self) -> String {
        [self.beta, self.alpha_m, self.sigma_max, self.g_residual].map(fmt_num).join(",")
    }
}

/// Sensitivity rows (`beta` outer, `alpha` inner) and one marker per `beta`.
pub fn fig2_rows(preset: &Fig2Preset) -> Result<(Vec<Fig2Row>, Vec<AlphaMarker>), AnalyticsError> {
    let mut rows = Vec::with_capacity(preset.betas.len() * preset.alphas.len());
    for &beta in &preset.betas {
        for &alpha in &preset.alphas {
            rows.push(Fig2Row {
                alpha,
                beta,
                sigma: sensitivity_reduced(alpha, beta)?,
            });
        }
    }
    let markers = preset
        .betas
        .iter()
        .map(|&b| AlphaMarker::new(b))
        .collect::<Result<_, _>>()?;
    Ok((rows, markers))
}

impl Fig2Row {
    pub fn csv(&self) -> String {
        [self.alpha, self.beta, self.sigma].map(fmt_num).join(",")
    }
}
