//! Scenario file reader/writer.
//!
//! A scenario is a TOML document whose first line is the format tag
//! `format = "ndr-scenario/1"`, followed by the sections `[simulation]`,
//! `[[links]]`, `[[junctions]]`, `[[phases]]`, `[[detectors]]`, `[[zones]]`,
//! `[demand]` (with `[[demand.od]]` entries), `[control]`, and the optional
//! `[[approaches]]`, `[drivers.<class>]` and `[emissions.<class>]` tables.
//! See `docs/scenario-format.md` for the field reference.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_scenario, ApproachOverride, ControlScope, DemandSpec, DetectorConfig, Link, Phase,
    SignalPlan, TrafficNetwork, VehicleClass, Zone,
};
use crate::emissions::{ClassFactors, EmissionFactors};
use crate::microsim::{DriverParams, DriverTable, SimSettings};
use crate::{Error, Result};

pub const FORMAT_TAG: &str = "ndr-scenario/1";

/// A loaded, validated scenario: network, demand, control scope and the
/// per-class driver and emission tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub simulation: SimSettings,
    pub network: TrafficNetwork,
    pub demand: DemandSpec,
    pub scope: ControlScope,
    pub drivers: DriverTable,
    pub emission_factors: EmissionFactors,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    simulation: SimSettings,
    #[serde(default)]
    links: Vec<Link>,
    #[serde(default)]
    junctions: Vec<JunctionEntry>,
    #[serde(default)]
    phases: Vec<PhaseEntry>,
    #[serde(default)]
    detectors: Vec<DetectorConfig>,
    #[serde(default)]
    zones: Vec<Zone>,
    demand: DemandSpec,
    #[serde(default)]
    control: ControlEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    approaches: Vec<ApproachOverride>,
    #[serde(default)]
    drivers: BTreeMap<VehicleClass, DriverParams>,
    #[serde(default)]
    emissions: BTreeMap<VehicleClass, ClassFactors>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JunctionEntry {
    id: String,
    node: String,
    cycle_time: f64,
    lost_time: f64,
    #[serde(default)]
    offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseEntry {
    junction: String,
    id: String,
    movements: Vec<(String, String)>,
    g_min: f64,
    g_max: f64,
    default_green: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlEntry {
    #[serde(default)]
    junctions: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    detectors: Vec<DetectorConfig>,
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let scenario = parse_scenario(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    let diags = validate_scenario(&scenario);
    if diags.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Invalid(diags))
    }
}

/// Parse scenario text without running validation.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let parse_err = |message: String| Error::Parse {
        path: "<scenario>".into(),
        message,
    };
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if file.format != FORMAT_TAG {
        return Err(parse_err(format!(
            "unsupported format {:?}, expected {FORMAT_TAG:?}",
            file.format
        )));
    }

    let mut junctions: Vec<SignalPlan> = file
        .junctions
        .into_iter()
        .map(|j| SignalPlan {
            junction_id: j.id,
            node: j.node,
            cycle_time: j.cycle_time,
            lost_time: j.lost_time,
            offset: j.offset,
            phases: Vec::new(),
        })
        .collect();
    for p in file.phases {
        let plan = junctions
            .iter_mut()
            .find(|j| j.junction_id == p.junction)
            .ok_or_else(|| {
                parse_err(format!(
                    "phase {:?} references unknown junction {:?}",
                    p.id, p.junction
                ))
            })?;
        plan.phases.push(Phase {
            id: p.id,
            movements: p.movements,
            g_min: p.g_min,
            g_max: p.g_max,
            default_green: p.default_green,
        });
    }

    let mut drivers = DriverTable::default();
    drivers.0.extend(file.drivers);
    let mut emission_factors = EmissionFactors::default();
    emission_factors.classes.extend(file.emissions);

    Ok(Scenario {
        name: file.name,
        simulation: file.simulation,
        network: TrafficNetwork::new(
            file.links,
            junctions,
            file.detectors,
            file.zones,
            file.approaches,
        ),
        demand: file.demand,
        scope: ControlScope {
            controlled_junctions: file.control.junctions,
        },
        drivers,
        emission_factors,
    })
}

/// Read a detector layout file (a document holding only `[[detectors]]`).
pub fn read_detector_layout(path: impl AsRef<Path>) -> Result<Vec<DetectorConfig>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let layout: LayoutFile = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(layout.detectors)
}

impl Scenario {
    /// Serialize back to the scenario file format.
    pub fn to_toml(&self) -> String {
        let net = &self.network;
        let file = ScenarioFile {
            format: FORMAT_TAG.to_string(),
            name: self.name.clone(),
            simulation: self.simulation.clone(),
            links: net.links.clone(),
            junctions: net
                .junctions
                .iter()
                .map(|j| JunctionEntry {
                    id: j.junction_id.clone(),
                    node: j.node.clone(),
                    cycle_time: j.cycle_time,
                    lost_time: j.lost_time,
                    offset: j.offset,
                })
                .collect(),
            phases: net
                .junctions
                .iter()
                .flat_map(|j| {
                    j.phases.iter().map(|p| PhaseEntry {
                        junction: j.junction_id.clone(),
                        id: p.id.clone(),
                        movements: p.movements.clone(),
                        g_min: p.g_min,
                        g_max: p.g_max,
                        default_green: p.default_green,
                    })
                })
                .collect(),
            detectors: net.detectors.clone(),
            zones: net.zones.clone(),
            demand: self.demand.clone(),
            control: ControlEntry {
                junctions: self.scope.controlled_junctions.clone(),
            },
            approaches: net.approaches.clone(),
            drivers: self.drivers.0.clone(),
            emissions: self.emission_factors.classes.clone(),
        };
        toml::to_string(&file).expect("scenario serializes to TOML")
    }

    pub fn with_scope(&self, scope: ControlScope) -> Self {
        Self {
            scope,
            ..self.clone()
        }
    }

    pub fn with_detectors(&self, detectors: Vec<DetectorConfig>) -> Self {
        Self {
            network: self.network.with_detectors(detectors),
            ..self.clone()
        }
    }

    pub fn with_demand_scale(&self, factor: f64) -> Self {
        Self {
            demand: self.demand.scaled(factor),
            ..self.clone()
        }
    }
}
