use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{NetworkConfig, Result, RunOptions, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub time: f64,
    pub neuron: u32,
}

/// Provenance and thinning statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub config: NetworkConfig,
    pub seed: u64,
    pub options: RunOptions,
    pub end_time: f64,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// The total intensity bound hit zero: no further spike can occur.
    pub exhausted: bool,
    pub wall_clock_seconds: f64,
    pub timestamp: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    pub events: Vec<Spike>,
    pub meta: RecordMeta,
}

impl SpikeRecord {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Fails if two events share a time, go backwards, or a neuron fires
    /// twice within `delta`.
    pub fn check_refractory(&self, delta: f64) -> Result<()> {
        let mut last = vec![f64::NEG_INFINITY; self.meta.config.n];
        let mut prev = f64::NEG_INFINITY;
        for spike in &self.events {
            if spike.time <= prev {
                return Err(SimError::BoundViolation(format!(
                    "event times not strictly increasing at t = {}",
                    spike.time
                )));
            }
            prev = spike.time;
            let slot = &mut last[spike.neuron as usize];
            if spike.time - *slot < delta {
                return Err(SimError::BoundViolation(format!(
                    "neuron {} fired twice within delta at t = {}",
                    spike.neuron, spike.time
                )));
            }
            *slot = spike.time;
        }
        Ok(())
    }

    /// Writes the `time,neuron` table. Times use the shortest decimal that
    /// round-trips, so no precision is lost.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(comment) = comment {
            writeln!(out, "# {comment}")?;
        }
        writeln!(out, "time,neuron")?;
        for spike in &self.events {
            writeln!(out, "{},{}", spike.time, spike.neuron)?;
        }
        out.flush()
    }
}

/// Reads a `time,neuron` table, skipping `#` comment lines.
pub fn read_spikes_csv<R: BufRead>(input: R) -> std::io::Result<Vec<Spike>> {
    let invalid = |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
    let mut spikes = Vec::new();
    let mut saw_header = false;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "time,neuron" {
                return Err(invalid(format!("unexpected header {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let (time, neuron) = line
            .split_once(',')
            .ok_or_else(|| invalid(format!("malformed row {line:?}")))?;
        spikes.push(Spike {
            time: time.parse().map_err(|e| invalid(format!("{e}: {time}")))?,
            neuron: neuron.parse().map_err(|e| invalid(format!("{e}: {neuron}")))?,
        });
    }
    Ok(spikes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_network, simulate, NetworkConfig, StopRule};
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = NetworkConfig::dirac(30, 3.0, 0.7, 0.002, 4);
        let rec = simulate(&build_network(&cfg).unwrap(), StopRule::MaxSpikes(500)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, Some("seed=4")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=4\ntime,neuron\n"));
        let back = read_spikes_csv(&buf[..]).unwrap();
        assert_eq!(back, rec.events);
    }

    #[test]
    fn refractory_check_catches_violations() {
        let cfg = NetworkConfig::dirac(2, 1.0, 0.0, 0.1, 1);
        let rec = simulate(&build_network(&cfg).unwrap(), StopRule::MaxSpikes(5)).unwrap();
        let mut bad = rec.clone();
        bad.events = vec![Spike { time: 1.0, neuron: 0 }, Spike { time: 1.05, neuron: 0 }];
        assert!(bad.check_refractory(0.1).is_err());
        bad.events = vec![Spike { time: 1.0, neuron: 0 }, Spike { time: 1.0, neuron: 1 }];
        assert!(bad.check_refractory(0.1).is_err());
        bad.events = vec![Spike { time: 1.0, neuron: 0 }, Spike { time: 1.1, neuron: 0 }];
        assert!(bad.check_refractory(0.1).is_ok());
    }

    proptest! {
        #[test]
        fn time_formatting_round_trips(t in 0.0f64..1e6) {
            let text = format!("{t}");
            prop_assert_eq!(text.parse::<f64>().unwrap(), t);
            prop_assert!(!text.contains('e'));
        }
    }
}
