//! Static road network, signal plans, detectors and travel demand.
//!
//! Everything here is immutable once a [`Scenario`] has been loaded and
//! validated; simulation workers share it by reference.

mod routing;
mod scenario;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use routing::{shortest_route, RouteTable};
pub use scenario::{load_scenario, parse_scenario, read_detector_layout, Scenario, FORMAT_TAG};
pub use validate::{validate_scenario, Diagnostic, DiagnosticKind};

/// Tolerance used when checking that green splits fill the cycle budget.
pub const BUDGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Car,
    Bus,
    Lgv,
    Hgv,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 4] = [Self::Car, Self::Bus, Self::Lgv, Self::Hgv];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Car => "car",
            Self::Bus => "bus",
            Self::Lgv => "lgv",
            Self::Hgv => "hgv",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::UnknownClass(s.to_string()))
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Meters.
    pub length: f64,
    /// m/s.
    pub free_flow_speed: f64,
    pub lanes: u32,
    /// Rise over run.
    #[serde(default)]
    pub gradient: f64,
}

impl Link {
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.free_flow_speed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub id: String,
    /// (incoming link, outgoing link) pairs released during this phase.
    pub movements: Vec<(String, String)>,
    pub g_min: f64,
    pub g_max: f64,
    pub default_green: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub junction_id: String,
    pub node: String,
    pub cycle_time: f64,
    /// Amber, all-red and pedestrian time per cycle, unavailable to vehicle phases.
    pub lost_time: f64,
    #[serde(default)]
    pub offset: f64,
    pub phases: Vec<Phase>,
}

impl SignalPlan {
    /// Green time available to vehicle phases per cycle.
    pub fn budget(&self) -> f64 {
        self.cycle_time - self.lost_time
    }

    pub fn default_greens(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.default_green).collect()
    }

    pub fn feasible_set(&self) -> crate::feasibility::FeasibleSet {
        crate::feasibility::FeasibleSet {
            lower: self.phases.iter().map(|p| p.g_min).collect(),
            upper: self.phases.iter().map(|p| p.g_max).collect(),
            budget: self.budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub id: String,
    pub link: String,
    /// Meters from the upstream end of the link.
    pub position: f64,
    /// Aggregation period in seconds.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub node: String,
}

/// Overrides the upstream extent over which a junction approach accumulates emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachOverride {
    pub junction: String,
    pub link: String,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdDemand {
    pub origin: String,
    pub destination: String,
    /// Departure rate in veh/h, one entry per time slice; the last entry holds
    /// for the rest of the horizon.
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub slice_seconds: f64,
    #[serde(default = "one")]
    pub scale_factor: f64,
    pub fleet_mix: BTreeMap<VehicleClass, f64>,
    #[serde(default)]
    pub od: Vec<OdDemand>,
}

fn one() -> f64 {
    1.0
}

impl DemandSpec {
    /// Scaled rate in veh/s for an OD entry at simulation time `t`.
    pub fn rate_per_second(&self, od: &OdDemand, t: f64) -> f64 {
        if od.rates.is_empty() {
            return 0.0;
        }
        let slice = ((t / self.slice_seconds).floor() as usize).min(od.rates.len() - 1);
        od.rates[slice] * self.scale_factor / 3600.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale_factor: self.scale_factor * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlScope {
    pub controlled_junctions: Vec<String>,
}

/// Road graph plus signal plans and sensors, with id lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficNetwork {
    pub links: Vec<Link>,
    pub junctions: Vec<SignalPlan>,
    pub detectors: Vec<DetectorConfig>,
    pub zones: Vec<Zone>,
    pub approaches: Vec<ApproachOverride>,
    link_index: BTreeMap<String, usize>,
    junction_index: BTreeMap<String, usize>,
}

impl TrafficNetwork {
    pub fn new(
        links: Vec<Link>,
        junctions: Vec<SignalPlan>,
        detectors: Vec<DetectorConfig>,
        zones: Vec<Zone>,
        approaches: Vec<ApproachOverride>,
    ) -> Self {
        let link_index = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        let junction_index = junctions
            .iter()
            .enumerate()
            .map(|(i, j)| (j.junction_id.clone(), i))
            .collect();
        Self {
            links,
            junctions,
            detectors,
            zones,
            approaches,
            link_index,
            junction_index,
        }
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn junction_idx(&self, id: &str) -> Option<usize> {
        self.junction_index.get(id).copied()
    }

    /// Junction whose signal controls the downstream end of `link`, if any.
    pub fn junction_at_node(&self, node: &str) -> Option<usize> {
        self.junctions.iter().position(|j| j.node == node)
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    /// Replace the detector layout, e.g. for sensor relocation studies.
    pub fn with_detectors(&self, detectors: Vec<DetectorConfig>) -> Self {
        Self {
            detectors,
            ..self.clone()
        }
    }

    /// Upstream extent of each incoming approach for junction `j`, as
    /// (link index, extent in meters). Defaults to the full link length.
    pub fn approach_set(&self, j: usize) -> Vec<(usize, f64)> {
        let plan = &self.junctions[j];
        let mut out = Vec::new();
        for (li, link) in self.links.iter().enumerate() {
            if link.to != plan.node {
                continue;
            }
            let extent = self
                .approaches
                .iter()
                .find(|a| a.junction == plan.junction_id && a.link == link.id)
                .map(|a| a.extent)
                .unwrap_or(link.length);
            out.push((li, extent));
        }
        out
    }

    pub fn total_phase_count(&self, scope: &ControlScope) -> usize {
        self.controlled_indices(scope)
            .iter()
            .map(|&j| self.junctions[j].phases.len())
            .sum()
    }

    /// Indices of controlled junctions, in scenario order.
    pub fn controlled_indices(&self, scope: &ControlScope) -> Vec<usize> {
        self.junctions
            .iter()
            .enumerate()
            .filter(|(_, j)| scope.controlled_junctions.contains(&j.junction_id))
            .map(|(i, _)| i)
            .collect()
    }
}
