use serde::{Deserialize, Serialize};

use super::{Result, SimError, SpikeRecord};

/// Number of equal sub-intervals used for the batch-means standard error.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationScheme {
    /// The first `k` spikes strictly after `burn_in`: `k / (n (t_k - burn_in))`.
    FirstK { k: usize, burn_in: f64 },
    /// Spikes in `(t0, t1]`: `count / (n (t1 - t0))`.
    Window { t0: f64, t1: f64 },
}

impl EstimationScheme {
    pub fn first_k(k: usize) -> Self {
        EstimationScheme::FirstK { k, burn_in: 0.0 }
    }
}

/// Per-neuron firing rate and its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityEstimate {
    pub rate: f64,
    pub std_error: f64,
    pub spikes: usize,
    pub t_start: f64,
    pub t_end: f64,
}

pub fn estimate_activity(record: &SpikeRecord, n: usize, scheme: EstimationScheme) -> Result<ActivityEstimate> {
    if n == 0 {
        return Err(SimError::InsufficientData("n must be positive".into()));
    }
    let times: Vec<f64> = record.events.iter().map(|s| s.time).collect();
    let (t_start, t_end, window) = match scheme {
        EstimationScheme::FirstK { k, burn_in } => {
            if k == 0 {
                return Err(SimError::InsufficientData("k must be positive".into()));
            }
            let first = times.partition_point(|&t| t <= burn_in);
            if times.len() - first < k {
                return Err(SimError::InsufficientData(format!(
                    "{} spikes after t = {burn_in}, {k} requested",
                    times.len() - first
                )));
            }
            (burn_in, times[first + k - 1], &times[first..first + k])
        }
        EstimationScheme::Window { t0, t1 } => {
            if !(t1 > t0) {
                return Err(SimError::InsufficientData(format!("empty window ({t0}, {t1}]")));
            }
            if record.meta.end_time < t1 {
                return Err(SimError::InsufficientData(format!(
                    "record ends at {} before window end {t1}",
                    record.meta.end_time
                )));
            }
            let lo = times.partition_point(|&t| t <= t0);
            let hi = times.partition_point(|&t| t <= t1);
            if hi == lo {
                return Err(SimError::InsufficientData(format!("no spikes in ({t0}, {t1}]")));
            }
            (t0, t1, &times[lo..hi])
        }
    };
    let span = t_end - t_start;
    if !(span > 0.0) {
        return Err(SimError::InsufficientData("estimation window has zero length".into()));
    }
    let rate = window.len() as f64 / (n as f64 * span);
    Ok(ActivityEstimate {
        rate,
        std_error: batch_means_error(window, t_start, span, n),
        spikes: window.len(),
        t_start,
        t_end,
    })
}

fn batch_means_error(times: &[f64], t_start: f64, span: f64, n: usize) -> f64 {
    let width = span / BATCHES as f64;
    let mut counts = [0usize; BATCHES];
    for &t in times {
        // (t_start, t_end] split into right-closed batches
        let b = (((t - t_start) / width).ceil() as usize).clamp(1, BATCHES) - 1;
        counts[b] += 1;
    }
    let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
    let mean = rates.iter().sum::<f64>() / BATCHES as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (var / BATCHES as f64).sqrt()
}
