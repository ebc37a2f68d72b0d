use serde::{Deserialize, Serialize};

use crate::emissions::{EmissionRecord, SpeciesTotals};
use crate::microsim::{SimOutput, TripRecord};
use crate::{Error, Result};

/// Mean trip delay over completed trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStat {
    /// s/veh; 0 when no trip completed.
    pub mean: f64,
    pub completed: usize,
}

impl DelayStat {
    /// True when the mean was defined as 0 because nothing completed.
    pub fn is_empty(&self) -> bool {
        self.completed == 0
    }
}

/// Mean of `arrive − depart − free_flow_time` over completed trips, each
/// floored at zero. Trips still in the network at the horizon are excluded.
pub fn kpi_delay(trips: &[TripRecord]) -> DelayStat {
    let mut sum = 0.0;
    let mut completed = 0;
    for t in trips {
        if let Some(arrive) = t.arrive {
            sum += (arrive - t.depart - t.free_flow_time).max(0.0);
            completed += 1;
        }
    }
    if completed == 0 {
        log::warn!("no completed trips, mean delay reported as 0");
        return DelayStat { mean: 0.0, completed };
    }
    DelayStat {
        mean: sum / completed as f64,
        completed,
    }
}

/// Online KPIs of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub seed: u64,
    /// s/veh over completed trips.
    pub mean_delay: f64,
    /// Set when no trip completed and `mean_delay` was defined as 0.
    pub no_completed_trips: bool,
    /// Completed trips.
    pub throughput: u64,
    pub departures: u64,
    /// kg, network-wide.
    pub co2: f64,
    /// g, network-wide.
    pub bc: f64,
    /// Mean stopped vehicles over the run, network-wide.
    pub mean_queue: f64,
    pub queue_per_link: Vec<f64>,
    pub junction_emissions: Vec<SpeciesTotals>,
    pub gridlock: Option<f64>,
}

impl KpiRecord {
    pub fn from_run(out: &SimOutput, emissions: &EmissionRecord) -> Self {
        let delay = kpi_delay(&out.trips);
        Self {
            seed: out.seed,
            mean_delay: delay.mean,
            no_completed_trips: delay.is_empty(),
            throughput: out.completed,
            departures: out.departed,
            co2: emissions.network.co2,
            bc: emissions.network.bc,
            mean_queue: out.queue_stats.network_mean(),
            queue_per_link: out.queue_stats.mean_per_link.clone(),
            junction_emissions: emissions.by_junction.clone(),
            gridlock: out.gridlock,
        }
    }

    pub fn check(&self) -> Result<()> {
        let nonneg = [self.mean_delay, self.co2, self.bc, self.mean_queue]
            .into_iter()
            .chain(self.queue_per_link.iter().copied())
            .all(|v| v >= 0.0);
        if !nonneg {
            return Err(Error::InvalidArgument(format!("seed {}: negative KPI", self.seed)));
        }
        if self.throughput > self.departures {
            return Err(Error::InvalidArgument(format!(
                "seed {}: throughput {} exceeds departures {}",
                self.seed, self.throughput, self.departures
            )));
        }
        Ok(())
    }
}

/// The headline KPIs, used for means, deltas and percentages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub mean_delay: f64,
    pub throughput: f64,
    pub co2: f64,
    pub bc: f64,
    pub mean_queue: f64,
}

impl KpiSummary {
    pub const FIELDS: [&'static str; 5] = ["mean_delay", "throughput", "co2", "bc", "mean_queue"];

    pub fn of(r: &KpiRecord) -> Self {
        Self {
            mean_delay: r.mean_delay,
            throughput: r.throughput as f64,
            co2: r.co2,
            bc: r.bc,
            mean_queue: r.mean_queue,
        }
    }

    pub fn mean(records: &[KpiRecord]) -> Self {
        let n = records.len().max(1) as f64;
        let mut acc = [0.0; 5];
        for r in records {
            for (a, v) in acc.iter_mut().zip(Self::of(r).values()) {
                *a += v;
            }
        }
        Self::from_values(acc.map(|a| a / n))
    }

    pub fn values(&self) -> [f64; 5] {
        [self.mean_delay, self.throughput, self.co2, self.bc, self.mean_queue]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        Self {
            mean_delay: v[0],
            throughput: v[1],
            co2: v[2],
            bc: v[3],
            mean_queue: v[4],
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.values(), other.values());
        Self::from_values(std::array::from_fn(|i| f(a[i], b[i])))
    }
}
