use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{shortest_route, Scenario, BUDGET_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    DuplicateId,
    UnknownReference,
    LinkInvariant,
    PhaseBound,
    InfeasibleBudget,
    DefaultTiming,
    Detector,
    Demand,
    UnreachableOdPair,
    Scope,
    Approach,
    Settings,
    Factors,
}

impl DiagnosticKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::DuplicateId => "duplicate id",
            Self::UnknownReference => "unknown reference",
            Self::LinkInvariant => "link invariant",
            Self::PhaseBound => "phase bound",
            Self::InfeasibleBudget => "infeasible budget",
            Self::DefaultTiming => "default timing",
            Self::Detector => "detector",
            Self::Demand => "demand",
            Self::UnreachableOdPair => "unreachable OD pair",
            Self::Scope => "control scope",
            Self::Approach => "approach",
            Self::Settings => "simulation settings",
            Self::Factors => "vehicle class table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Id of the offending entity.
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.kind.label(), self.entity, self.message)
    }
}

struct Sink(Vec<Diagnostic>);

impl Sink {
    fn push(&mut self, kind: DiagnosticKind, entity: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            kind,
            entity: entity.into(),
            message: message.into(),
        });
    }
}

fn check_unique<'a>(sink: &mut Sink, what: &str, ids: impl Iterator<Item = &'a str>) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            sink.push(DiagnosticKind::DuplicateId, id, format!("{what} id appears more than once"));
        }
    }
}

/// Check every scenario invariant. Returns an empty list iff the scenario is clean.
pub fn validate_scenario(sc: &Scenario) -> Vec<Diagnostic> {
    use DiagnosticKind::*;
    let mut d = Sink(Vec::new());
    let net = &sc.network;

    let s = &sc.simulation;
    if !(s.dt > 0.0) || !(s.horizon > 0.0) || !(s.control_period > 0.0) {
        d.push(Settings, "simulation", "dt, horizon and control_period must be positive");
    } else if (s.control_period / s.dt).fract() != 0.0 {
        d.push(Settings, "simulation", "control_period must be a whole number of steps");
    }

    check_unique(&mut d, "link", net.links.iter().map(|l| l.id.as_str()));
    check_unique(&mut d, "junction", net.junctions.iter().map(|j| j.junction_id.as_str()));
    check_unique(&mut d, "detector", net.detectors.iter().map(|x| x.id.as_str()));
    check_unique(&mut d, "zone", net.zones.iter().map(|z| z.id.as_str()));

    let nodes: BTreeSet<&str> = net
        .links
        .iter()
        .flat_map(|l| [l.from.as_str(), l.to.as_str()])
        .collect();

    for l in &net.links {
        if !(l.length > 0.0) {
            d.push(LinkInvariant, &l.id, format!("length {} must be > 0", l.length));
        }
        if !(l.free_flow_speed > 0.0) {
            d.push(LinkInvariant, &l.id, format!("free-flow speed {} must be > 0", l.free_flow_speed));
        }
        if l.lanes < 1 {
            d.push(LinkInvariant, &l.id, "lane count must be at least 1");
        }
        if !(l.gradient.abs() < 0.2) {
            d.push(LinkInvariant, &l.id, format!("|gradient| {} must be < 0.2", l.gradient));
        }
        if l.from == l.to {
            d.push(LinkInvariant, &l.id, "link starts and ends at the same node");
        }
    }

    for j in &net.junctions {
        let id = &j.junction_id;
        if !nodes.contains(j.node.as_str()) {
            d.push(UnknownReference, id, format!("node {:?} is not on any link", j.node));
        }
        if net.junctions.iter().filter(|o| o.node == j.node).count() > 1 {
            d.push(DuplicateId, id, format!("node {:?} carries more than one signal plan", j.node));
        }
        if !(j.cycle_time > 0.0) || !(j.lost_time >= 0.0) || j.lost_time >= j.cycle_time {
            d.push(InfeasibleBudget, id, "need cycle_time > lost_time >= 0");
        }
        if !(j.offset >= 0.0 && (j.offset < j.cycle_time || j.offset == 0.0)) {
            d.push(InfeasibleBudget, id, format!("offset {} outside [0, cycle_time)", j.offset));
        }
        if j.phases.is_empty() {
            d.push(PhaseBound, id, "junction has no phases");
            continue;
        }
        for p in &j.phases {
            let pid = format!("{id}/{}", p.id);
            if !(p.g_min > 0.0) || !(p.g_min <= p.g_max) {
                d.push(
                    PhaseBound,
                    &pid,
                    format!("need 0 < g_min <= g_max, got g_min={} g_max={}", p.g_min, p.g_max),
                );
            } else if !(p.g_min <= p.default_green && p.default_green <= p.g_max) {
                d.push(
                    DefaultTiming,
                    &pid,
                    format!("default green {} outside [{}, {}]", p.default_green, p.g_min, p.g_max),
                );
            }
            for (a, b) in &p.movements {
                match (net.link_idx(a), net.link_idx(b)) {
                    (Some(ai), Some(bi)) => {
                        if net.links[ai].to != j.node || net.links[bi].from != j.node {
                            d.push(
                                UnknownReference,
                                &pid,
                                format!("movement ({a}, {b}) does not pass through node {}", j.node),
                            );
                        }
                    }
                    _ => d.push(UnknownReference, &pid, format!("movement ({a}, {b}) names an unknown link")),
                }
            }
        }
        let budget = j.budget();
        let lo: f64 = j.phases.iter().map(|p| p.g_min).sum();
        let hi: f64 = j.phases.iter().map(|p| p.g_max).sum();
        if lo > budget + BUDGET_TOL || hi < budget - BUDGET_TOL {
            d.push(
                InfeasibleBudget,
                id,
                format!("green budget {budget} not within [sum g_min {lo}, sum g_max {hi}]"),
            );
        }
        let def: f64 = j.phases.iter().map(|p| p.default_green).sum();
        if (def - budget).abs() > BUDGET_TOL {
            d.push(
                DefaultTiming,
                id,
                format!("default greens sum to {def}, expected cycle_time - lost_time = {budget}"),
            );
        }
    }

    for x in &net.detectors {
        match net.link_idx(&x.link) {
            None => d.push(UnknownReference, &x.id, format!("unknown link {:?}", x.link)),
            Some(li) => {
                let len = net.links[li].length;
                if !(x.position >= 0.0 && x.position <= len) {
                    d.push(Detector, &x.id, format!("position {} outside [0, {len}]", x.position));
                }
            }
        }
        if !(x.period > 0.0) {
            d.push(Detector, &x.id, "aggregation period must be > 0");
        }
    }
    if let Some(first) = net.detectors.first() {
        if net.detectors.iter().any(|x| x.period != first.period) {
            d.push(Detector, "detectors", "all detectors must share one aggregation period");
        }
    }

    for z in &net.zones {
        if !nodes.contains(z.node.as_str()) {
            d.push(UnknownReference, &z.id, format!("zone node {:?} is not on any link", z.node));
        }
    }

    let dm = &sc.demand;
    if !(dm.scale_factor > 0.0) {
        d.push(Demand, "demand", format!("scale_factor {} must be > 0", dm.scale_factor));
    }
    if !(dm.slice_seconds > 0.0) {
        d.push(Demand, "demand", "slice_seconds must be > 0");
    }
    let share: f64 = dm.fleet_mix.values().sum();
    if (share - 1.0).abs() > 1e-9 || dm.fleet_mix.values().any(|&v| !(v >= 0.0)) {
        d.push(Demand, "fleet_mix", format!("shares must be non-negative and sum to 1, got {share}"));
    }
    for od in &dm.od {
        let key = format!("{}->{}", od.origin, od.destination);
        if od.rates.iter().any(|&r| !(r >= 0.0)) {
            d.push(Demand, &key, "departure rates must be >= 0");
        }
        if od.origin == od.destination {
            d.push(Demand, &key, "intra-zonal demand is not allowed");
            continue;
        }
        match (net.zone(&od.origin), net.zone(&od.destination)) {
            (Some(o), Some(t)) => {
                if shortest_route(net, &o.node, &t.node).is_none() {
                    d.push(UnreachableOdPair, &key, "no path from origin to destination");
                }
            }
            _ => d.push(UnknownReference, &key, "OD pair references an unknown zone"),
        }
    }

    for j in &sc.scope.controlled_junctions {
        if net.junction_idx(j).is_none() {
            d.push(Scope, j, "controlled junction is not in the network");
        }
    }

    for a in &net.approaches {
        let entity = format!("{}/{}", a.junction, a.link);
        match (net.junction_idx(&a.junction), net.link_idx(&a.link)) {
            (Some(ji), Some(li)) => {
                let l = &net.links[li];
                if l.to != net.junctions[ji].node {
                    d.push(Approach, &entity, "link does not enter the junction");
                }
                if !(a.extent >= 0.0 && a.extent <= l.length) {
                    d.push(Approach, &entity, format!("extent {} outside [0, {}]", a.extent, l.length));
                }
            }
            _ => d.push(UnknownReference, &entity, "approach names an unknown junction or link"),
        }
    }

    for (class, p) in &sc.drivers.0 {
        if let Err(msg) = p.check() {
            d.push(Factors, class.as_str(), msg);
        }
    }
    for (class, f) in &sc.emission_factors.classes {
        if let Err(msg) = f.check() {
            d.push(Factors, class.as_str(), msg);
        }
    }
    for class in dm.fleet_mix.iter().filter(|(_, &s)| s > 0.0).map(|(c, _)| c) {
        if !sc.drivers.0.contains_key(class) || !sc.emission_factors.classes.contains_key(class) {
            d.push(Factors, class.as_str(), "class in fleet mix lacks driver or emission parameters");
        }
    }

    d.0
}
