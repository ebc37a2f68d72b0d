//! Discrete-time microscopic traffic simulator.
//!
//! Single effective lane per link, IDM car following, fixed free-flow
//! shortest-path routes, Poisson departures per OD pair, and pre-timed
//! signals whose splits a [`SignalController`] may retime at decision epochs.

mod driver;
mod engine;
mod export;
mod signal;

use serde::{Deserialize, Serialize};

pub use driver::{idm_acceleration, DriverParams, DriverTable, Lead, MAX_ACCEL_MAGNITUDE};
pub use engine::{run_simulation, run_simulation_with_sink, SimOutput, Simulation};
pub use export::{write_trajectories_csv, write_trips_csv};
pub use signal::SignalState;

use crate::network::VehicleClass;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// Trajectory resolution, s.
    pub dt: f64,
    pub horizon: f64,
    /// Interval between controller decisions, s.
    pub control_period: f64,
    /// Speed below which a vehicle counts as queued, m/s.
    pub stopped_speed: f64,
    /// A run where nothing moves for this long is flagged as gridlocked, s.
    pub gridlock_span: f64,
    /// Per-vehicle desired speed factor is drawn from 1 ± spread.
    pub speed_factor_spread: f64,
    /// Deceleration beyond which a driver facing a fresh red proceeds rather than stopping, m/s².
    pub dilemma_decel: f64,
    /// Hard lower bound on bumper-to-bumper gaps, m.
    pub min_gap: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.5,
            horizon: 1800.0,
            control_period: 600.0,
            stopped_speed: 0.5,
            gridlock_span: 300.0,
            speed_factor_spread: 0.1,
            dilemma_decel: 4.0,
            min_gap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub step: u64,
    pub dt: f64,
    pub horizon: f64,
}

impl SimClock {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }
}

/// True exactly at whole multiples of the control period (including t = 0).
pub fn decision_epoch_hook(clock: &SimClock, control_period: f64) -> bool {
    let period_steps = (control_period / clock.dt).round() as u64;
    period_steps > 0 && clock.step % period_steps == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub vehicle_id: u64,
    pub class: VehicleClass,
    /// Link index into `TrafficNetwork::links`.
    pub link: usize,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Receives every trajectory point as the simulation produces it.
pub trait TrajectorySink {
    fn record(&mut self, p: &TrajectoryPoint);
}

impl TrajectorySink for Vec<TrajectoryPoint> {
    fn record(&mut self, p: &TrajectoryPoint) {
        self.push(*p);
    }
}

impl TrajectorySink for () {
    fn record(&mut self, _: &TrajectoryPoint) {}
}

impl<A: TrajectorySink, B: TrajectorySink> TrajectorySink for (A, B) {
    fn record(&mut self, p: &TrajectoryPoint) {
        self.0.record(p);
        self.1.record(p);
    }
}

impl<S: TrajectorySink + ?Sized> TrajectorySink for &mut S {
    fn record(&mut self, p: &TrajectoryPoint) {
        (**self).record(p);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle_id: u64,
    pub class: VehicleClass,
    pub origin: String,
    pub destination: String,
    pub depart: f64,
    /// `None` if the vehicle was still in the network at the horizon.
    pub arrive: Option<f64>,
    pub free_flow_time: f64,
    pub route_length: f64,
}

/// Per-detector flow counts, one per aggregation period.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorLog {
    pub period: f64,
    pub counts: Vec<Vec<u32>>,
}

impl DetectorLog {
    pub fn new(n_detectors: usize, period: f64, horizon: f64) -> Self {
        let n_periods = if period > 0.0 {
            (horizon / period).ceil() as usize
        } else {
            0
        };
        Self {
            period,
            counts: vec![vec![0; n_periods]; n_detectors],
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.counts.len()
    }

    /// Number of aggregation periods fully elapsed at time `t`.
    pub fn completed_periods(&self, t: f64) -> usize {
        if self.period > 0.0 {
            (t / self.period).floor() as usize
        } else {
            0
        }
    }

    fn bump(&mut self, detector: usize, t: f64) {
        let k = (t / self.period).floor() as usize;
        if let Some(c) = self.counts[detector].get_mut(k) {
            *c += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueStats {
    /// Mean number of queued vehicles per link, averaged over all steps.
    pub mean_per_link: Vec<f64>,
}

impl QueueStats {
    pub fn network_mean(&self) -> f64 {
        self.mean_per_link.iter().sum()
    }
}

/// Context handed to the controller at each decision epoch.
pub struct ControlRequest<'a> {
    pub time: f64,
    pub detectors: &'a DetectorLog,
}

/// New green times for controlled junctions, keyed by junction index.
pub type ControlDecision = Vec<(usize, Vec<f64>)>;

pub trait SignalController {
    fn decide(&mut self, req: &ControlRequest<'_>) -> Result<ControlDecision>;
}

/// Runs every junction on its default timing.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedTiming;

impl SignalController for FixedTiming {
    fn decide(&mut self, _: &ControlRequest<'_>) -> Result<ControlDecision> {
        Ok(Vec::new())
    }
}

impl<F> SignalController for F
where
    F: FnMut(&ControlRequest<'_>) -> Result<ControlDecision>,
{
    fn decide(&mut self, req: &ControlRequest<'_>) -> Result<ControlDecision> {
        self(req)
    }
}
