//! Instantaneous fuel, carbon and particulate emission surrogate, and
//! aggregation over trajectories at network and junction-approach level.
//!
//! Tractive power demand is
//!
//! ```text
//! P = m·a·v + m·g·grad·v + (c_rr·m·g + ½·ρ·CdA·v²)·v          [W]
//! fuel = max(idle, α + β·max(P, 0)/1000)                       [g/s]
//! carbon = fuel · carbon_fraction
//! pm = γ·v + δ·max(a, 0)² + pm_idle                             [g/s]
//! ```
//!
//! CO₂ is derived from carbon mass by the molecular-weight ratio 44/12 and
//! black carbon is a fixed per-class share of PM.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::microsim::{TrajectoryPoint, TrajectorySink};
use crate::network::{TrafficNetwork, VehicleClass};
use crate::{Error, Result};

pub const GRAVITY: f64 = 9.81;
pub const AIR_DENSITY: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFactors {
    /// kg
    pub mass: f64,
    pub rolling_resistance: f64,
    /// Drag coefficient times frontal area, m².
    pub drag_area: f64,
    /// g/s
    pub idle_fuel: f64,
    /// α, g/s
    pub fuel_base: f64,
    /// β, g/s per kW of positive tractive power.
    pub fuel_per_kw: f64,
    /// g carbon per g fuel.
    pub carbon_fraction: f64,
    /// γ, g per meter travelled.
    pub pm_speed: f64,
    /// δ, g/s per (m/s²)².
    pub pm_accel: f64,
    /// g/s
    pub pm_idle: f64,
    pub bc_fraction: f64,
}

impl ClassFactors {
    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        let coeffs = [
            self.mass,
            self.rolling_resistance,
            self.drag_area,
            self.idle_fuel,
            self.fuel_base,
            self.fuel_per_kw,
            self.carbon_fraction,
            self.pm_speed,
            self.pm_accel,
            self.pm_idle,
        ];
        if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err("emission coefficients must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.bc_fraction) {
            return Err(format!("bc_fraction {} outside [0, 1]", self.bc_fraction));
        }
        if self.fuel_base > self.idle_fuel {
            return Err("fuel_base must not exceed idle_fuel".into());
        }
        Ok(())
    }

    fn default_for(class: VehicleClass) -> Self {
        match class {
            VehicleClass::Car => Self {
                mass: 1300.0,
                rolling_resistance: 0.0105,
                drag_area: 0.65,
                idle_fuel: 0.22,
                fuel_base: 0.22,
                fuel_per_kw: 0.085,
                carbon_fraction: 0.866,
                pm_speed: 2.0e-6,
                pm_accel: 2.0e-4,
                pm_idle: 5.0e-6,
                bc_fraction: 0.15,
            },
            VehicleClass::Bus => Self {
                mass: 12_000.0,
                rolling_resistance: 0.008,
                drag_area: 6.0,
                idle_fuel: 0.8,
                fuel_base: 0.8,
                fuel_per_kw: 0.075,
                carbon_fraction: 0.862,
                pm_speed: 5.0e-5,
                pm_accel: 3.0e-3,
                pm_idle: 1.0e-4,
                bc_fraction: 0.5,
            },
            VehicleClass::Lgv => Self {
                mass: 2500.0,
                rolling_resistance: 0.01,
                drag_area: 1.2,
                idle_fuel: 0.3,
                fuel_base: 0.3,
                fuel_per_kw: 0.08,
                carbon_fraction: 0.862,
                pm_speed: 2.0e-5,
                pm_accel: 8.0e-4,
                pm_idle: 3.0e-5,
                bc_fraction: 0.5,
            },
            VehicleClass::Hgv => Self {
                mass: 15_000.0,
                rolling_resistance: 0.007,
                drag_area: 6.5,
                idle_fuel: 0.9,
                fuel_base: 0.9,
                fuel_per_kw: 0.075,
                carbon_fraction: 0.862,
                pm_speed: 6.0e-5,
                pm_accel: 4.0e-3,
                pm_idle: 1.2e-4,
                bc_fraction: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactors {
    pub classes: BTreeMap<VehicleClass, ClassFactors>,
}

impl Default for EmissionFactors {
    fn default() -> Self {
        Self {
            classes: VehicleClass::ALL
                .into_iter()
                .map(|c| (c, ClassFactors::default_for(c)))
                .collect(),
        }
    }
}

impl EmissionFactors {
    pub fn get(&self, class: VehicleClass) -> Result<&ClassFactors> {
        self.classes
            .get(&class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }
}

/// Instantaneous rates in g/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub fuel: f64,
    pub carbon: f64,
    pub pm: f64,
}

/// Tractive power demand in watts.
pub fn tractive_power(f: &ClassFactors, speed: f64, accel: f64, gradient: f64) -> f64 {
    let m = f.mass;
    let resist = f.rolling_resistance * m * GRAVITY + 0.5 * AIR_DENSITY * f.drag_area * speed * speed;
    m * accel * speed + m * GRAVITY * gradient * speed + resist * speed
}

pub fn rates_for(f: &ClassFactors, speed: f64, accel: f64, gradient: f64) -> Rates {
    let power_kw = tractive_power(f, speed, accel, gradient).max(0.0) / 1000.0;
    let fuel = f.idle_fuel.max(f.fuel_base + f.fuel_per_kw * power_kw);
    let a_pos = accel.max(0.0);
    Rates {
        fuel,
        carbon: fuel * f.carbon_fraction,
        pm: f.pm_speed * speed + f.pm_accel * a_pos * a_pos + f.pm_idle,
    }
}

pub fn instantaneous_rates(
    factors: &EmissionFactors,
    class: VehicleClass,
    speed: f64,
    accel: f64,
    gradient: f64,
) -> Result<Rates> {
    if !(speed >= 0.0) {
        return Err(Error::InvalidArgument(format!("speed {speed} must be >= 0")));
    }
    Ok(rates_for(factors.get(class)?, speed, accel, gradient))
}

pub fn convert_carbon_to_co2(carbon_kg: f64) -> Result<f64> {
    if !(carbon_kg >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "carbon mass {carbon_kg} must be >= 0"
        )));
    }
    Ok(co2_from_carbon(carbon_kg))
}

fn co2_from_carbon(carbon_kg: f64) -> f64 {
    carbon_kg * 44.0 / 12.0
}

/// Raw accumulated masses in grams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Masses {
    pub carbon_g: f64,
    pub pm_g: f64,
    pub bc_g: f64,
}

impl Masses {
    fn add(&mut self, other: &Masses) {
        self.carbon_g += other.carbon_g;
        self.pm_g += other.pm_g;
        self.bc_g += other.bc_g;
    }
}

/// Emission totals for one scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeciesTotals {
    /// kg
    pub total_carbon: f64,
    /// kg
    pub co2: f64,
    /// g
    pub pm: f64,
    /// g
    pub bc: f64,
}

impl From<Masses> for SpeciesTotals {
    fn from(m: Masses) -> Self {
        let carbon_kg = m.carbon_g / 1000.0;
        Self {
            total_carbon: carbon_kg,
            co2: co2_from_carbon(carbon_kg),
            pm: m.pm_g,
            bc: m.bc_g,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub network: SpeciesTotals,
    /// Indexed like `TrafficNetwork::links`.
    pub by_link: Vec<SpeciesTotals>,
    /// One entry per time slice of `slice_seconds`.
    pub by_slice: Vec<SpeciesTotals>,
    pub slice_seconds: f64,
    /// Indexed like `TrafficNetwork::junctions`; sums over incoming approaches.
    pub by_junction: Vec<SpeciesTotals>,
}

/// Streaming aggregator; feed it trajectory points in any order.
#[derive(Debug)]
pub struct EmissionAccumulator<'a> {
    net: &'a TrafficNetwork,
    factors: &'a EmissionFactors,
    dt: f64,
    slice_seconds: f64,
    /// Per link: (junction index, extent) for every approach the link belongs to.
    approach_of: Vec<Vec<(usize, f64)>>,
    network: Masses,
    by_link: Vec<Masses>,
    by_slice: Vec<Masses>,
    by_junction: Vec<Masses>,
    error: Option<Error>,
}

impl<'a> EmissionAccumulator<'a> {
    pub fn new(net: &'a TrafficNetwork, factors: &'a EmissionFactors, dt: f64, slice_seconds: f64) -> Self {
        let mut approach_of = vec![Vec::new(); net.links.len()];
        for j in 0..net.junctions.len() {
            for (li, extent) in net.approach_set(j) {
                approach_of[li].push((j, extent));
            }
        }
        Self {
            net,
            factors,
            dt,
            slice_seconds,
            approach_of,
            network: Masses::default(),
            by_link: vec![Masses::default(); net.links.len()],
            by_slice: Vec::new(),
            by_junction: vec![Masses::default(); net.junctions.len()],
            error: None,
        }
    }

    /// Override the approach extents, e.g. to zero them out.
    pub fn with_approaches(mut self, approach_of: Vec<Vec<(usize, f64)>>) -> Self {
        self.approach_of = approach_of;
        self
    }

    pub fn add_point(&mut self, p: &TrajectoryPoint) -> Result<()> {
        let f = self.factors.get(p.class)?;
        let link = &self.net.links[p.link];
        let r = rates_for(f, p.speed, p.accel, link.gradient);
        let m = Masses {
            carbon_g: r.carbon * self.dt,
            pm_g: r.pm * self.dt,
            bc_g: r.pm * self.dt * f.bc_fraction,
        };
        self.network.add(&m);
        self.by_link[p.link].add(&m);
        let slice = (p.t / self.slice_seconds).floor().max(0.0) as usize;
        if self.by_slice.len() <= slice {
            self.by_slice.resize(slice + 1, Masses::default());
        }
        self.by_slice[slice].add(&m);
        for &(j, extent) in &self.approach_of[p.link] {
            if extent > 0.0 && link.length - p.position <= extent {
                self.by_junction[j].add(&m);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<EmissionRecord> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(EmissionRecord {
            network: self.network.into(),
            by_link: self.by_link.into_iter().map(Into::into).collect(),
            by_slice: self.by_slice.into_iter().map(Into::into).collect(),
            slice_seconds: self.slice_seconds,
            by_junction: self.by_junction.into_iter().map(Into::into).collect(),
        })
    }
}

impl TrajectorySink for EmissionAccumulator<'_> {
    fn record(&mut self, p: &TrajectoryPoint) {
        if self.error.is_none() {
            if let Err(e) = self.add_point(p) {
                self.error = Some(e);
            }
        }
    }
}

/// Aggregate a recorded trajectory set. Each point stands for `dt` seconds.
pub fn aggregate_emissions(
    trajectories: &[TrajectoryPoint],
    net: &TrafficNetwork,
    factors: &EmissionFactors,
    dt: f64,
    slice_seconds: f64,
) -> Result<EmissionRecord> {
    let mut acc = EmissionAccumulator::new(net, factors, dt, slice_seconds);
    for p in trajectories {
        acc.add_point(p)?;
    }
    acc.finish()
}

/// Emission report rows: (scope, species, value, unit).
pub fn report_rows(rec: &EmissionRecord, net: &TrafficNetwork) -> Vec<(String, &'static str, f64, &'static str)> {
    let mut rows = Vec::new();
    let mut push = |scope: String, t: &SpeciesTotals| {
        rows.push((scope.clone(), "carbon", t.total_carbon, "kg"));
        rows.push((scope.clone(), "co2", t.co2, "kg"));
        rows.push((scope.clone(), "pm", t.pm, "g"));
        rows.push((scope, "bc", t.bc, "g"));
    };
    push("network".into(), &rec.network);
    for (j, t) in rec.by_junction.iter().enumerate() {
        push(format!("junction:{}", net.junctions[j].junction_id), t);
    }
    rows
}

pub fn write_report_csv<W: std::io::Write>(rec: &EmissionRecord, net: &TrafficNetwork, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "species", "value", "unit"])?;
    for (scope, species, value, unit) in report_rows(rec, net) {
        w.write_record([scope.as_str(), species, &value.to_string(), unit])?;
    }
    w.flush()?;
    Ok(())
}
