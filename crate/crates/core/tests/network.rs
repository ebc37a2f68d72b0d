mod common;

use common::{corridor2, fixture, scenario, signal_pair, straight_road};
use ndr_core::network::{
    load_scenario, parse_scenario, read_detector_layout, shortest_route, validate_scenario,
    ControlScope, DiagnosticKind, VehicleClass,
};
use ndr_core::Error;

fn kinds(text: &str) -> Vec<DiagnosticKind> {
    validate_scenario(&parse_scenario(text).unwrap())
        .into_iter()
        .map(|d| d.kind)
        .collect()
}

#[test]
fn corridor_shape() {
    let sc = corridor2();
    let net = &sc.network;
    assert_eq!(net.links.len(), 8);
    assert_eq!(net.junctions.len(), 2);
    assert_eq!(net.detectors.len(), 4);
    assert_eq!(net.total_phase_count(&sc.scope), 4);
    for j in &net.junctions {
        let total: f64 = j.default_greens().iter().sum();
        assert_eq!(total, j.budget());
    }
}

#[test]
fn bundled_fixtures_validate() {
    for name in ["corridor2.scenario", "corridor2_light.scenario", "single_junction.scenario"] {
        load_scenario(fixture(name)).unwrap();
    }
    let layout = read_detector_layout(fixture("layout_b.toml")).unwrap();
    let sc = corridor2().with_detectors(layout);
    assert!(validate_scenario(&sc).is_empty());
}

#[test]
fn toml_round_trip() {
    let sc = corridor2();
    let again = parse_scenario(&sc.to_toml()).unwrap();
    assert_eq!(sc, again);
}

#[test]
fn class_overrides_extend_defaults() {
    let text = straight_road(500.0, 10.0, 100.0, 60.0)
        + "\n[drivers.car]\nlength = 4.0\ndesired_speed = 15.0\nmax_accel = 1.2\ncomfortable_decel = 2.0\njam_spacing = 2.0\ntime_headway = 1.0\n";
    let sc = scenario(&text);
    assert_eq!(sc.drivers.0[&VehicleClass::Car].length, 4.0);
    assert!(sc.drivers.0.contains_key(&VehicleClass::Hgv));
}

#[test]
fn routes_follow_phase_movements() {
    let sc = corridor2();
    let net = &sc.network;
    let ids = |r: Vec<usize>| r.into_iter().map(|l| net.links[l].id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(shortest_route(net, "W", "E").unwrap()), ["W_A", "A_B", "B_E"]);
    assert_eq!(ids(shortest_route(net, "NA", "E").unwrap()), ["NA_A", "A_B", "B_E"]);
    // No side-street movement towards W is released at A.
    assert!(shortest_route(net, "NA", "W").is_none());
}

#[test]
fn unreachable_od_pair_is_reported() {
    let text = signal_pair(27.0, 27.0, 300.0, 60.0).replace(
        "origin = \"zw\"\ndestination = \"ze\"",
        "origin = \"zw\"\ndestination = \"zn\"",
    );
    let diags = validate_scenario(&parse_scenario(&text).unwrap());
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].kind, DiagnosticKind::UnreachableOdPair);
    assert!(diags[0].to_string().contains("unreachable OD pair"));
}

#[test]
fn default_greens_must_fill_budget() {
    let k = kinds(&signal_pair(30.0, 27.0, 300.0, 60.0));
    assert_eq!(k, [DiagnosticKind::DefaultTiming]);
}

#[test]
fn infeasible_bounds_are_reported() {
    let text = signal_pair(27.0, 27.0, 300.0, 60.0).replace("g_max = 49.0", "g_max = 26.0");
    let k = kinds(&text);
    assert!(k.contains(&DiagnosticKind::InfeasibleBudget));
}

#[test]
fn link_and_detector_invariants() {
    let text = signal_pair(27.0, 27.0, 300.0, 60.0)
        .replace("length = 300.0", "length = -1.0")
        .replace("position = 100.0", "position = 900.0");
    let k = kinds(&text);
    assert!(k.contains(&DiagnosticKind::LinkInvariant));
    assert!(k.contains(&DiagnosticKind::Detector));
}

#[test]
fn duplicate_ids_and_bad_fleet_mix() {
    let text = straight_road(500.0, 10.0, 100.0, 60.0)
        .replace("id = \"zb\"", "id = \"za\"")
        .replace("car = 1.0", "car = 0.7");
    let k = kinds(&text);
    assert!(k.contains(&DiagnosticKind::DuplicateId));
    assert!(k.contains(&DiagnosticKind::Demand));
}

#[test]
fn intra_zonal_demand_rejected() {
    let text = straight_road(500.0, 10.0, 100.0, 60.0).replace("destination = \"zb\"", "destination = \"za\"");
    assert_eq!(kinds(&text), [DiagnosticKind::Demand]);
}

#[test]
fn unknown_scope_junction() {
    let sc = corridor2().with_scope(ControlScope {
        controlled_junctions: vec!["Z".into()],
    });
    let diags = validate_scenario(&sc);
    assert_eq!(diags[0].kind, DiagnosticKind::Scope);
}

#[test]
fn parse_errors_name_the_problem() {
    let bad = straight_road(500.0, 10.0, 100.0, 60.0).replace("ndr-scenario/1", "ndr-scenario/9");
    match parse_scenario(&bad) {
        Err(Error::Parse { message, .. }) => assert!(message.contains("unsupported format")),
        other => panic!("{other:?}"),
    }
    let unknown_field = straight_road(500.0, 10.0, 100.0, 60.0).replace("lanes = 1", "lanes = 1\nspeed = 3");
    assert!(matches!(parse_scenario(&unknown_field), Err(Error::Parse { .. })));
}

#[test]
fn load_reports_every_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scenario");
    let text = signal_pair(30.0, 27.0, 300.0, 60.0).replace("car = 1.0", "car = 0.5");
    std::fs::write(&path, text).unwrap();
    match load_scenario(&path) {
        Err(Error::Invalid(d)) => assert_eq!(d.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn demand_rates_and_scaling() {
    let sc = corridor2();
    let od = &sc.demand.od[0];
    assert!((sc.demand.rate_per_second(od, 0.0) - 600.0 / 3600.0).abs() < 1e-15);
    assert!((sc.demand.rate_per_second(od, 700.0) - 700.0 / 3600.0).abs() < 1e-15);
    // The last slice holds past its end.
    assert!((sc.demand.rate_per_second(od, 5000.0) - 650.0 / 3600.0).abs() < 1e-15);
    let scaled = sc.with_demand_scale(1.3);
    assert!((scaled.demand.rate_per_second(od, 0.0) - 1.3 * 600.0 / 3600.0).abs() < 1e-15);
}

#[test]
fn approach_extent_defaults_to_link_length() {
    let sc = corridor2();
    let net = &sc.network;
    let a = net.junction_idx("A").unwrap();
    let set = net.approach_set(a);
    let ids: Vec<&str> = set.iter().map(|&(l, _)| net.links[l].id.as_str()).collect();
    assert_eq!(ids, ["W_A", "B_A", "NA_A"]);
    for (l, extent) in set {
        assert_eq!(extent, net.links[l].length);
    }
}
