#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use ndr_core::network::{parse_scenario, validate_scenario, Scenario};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn corridor2() -> Scenario {
    ndr_core::network::load_scenario(fixture("corridor2.scenario")).unwrap()
}

pub fn single_junction() -> Scenario {
    ndr_core::network::load_scenario(fixture("single_junction.scenario")).unwrap()
}

/// Parse and require a clean validation.
pub fn scenario(text: &str) -> Scenario {
    let sc = parse_scenario(text).unwrap();
    let diags = validate_scenario(&sc);
    assert!(diags.is_empty(), "{diags:?}");
    sc
}

/// A straight unsignalized road `A -> B` of `length` meters with one OD pair.
pub fn straight_road(length: f64, speed: f64, rate_veh_h: f64, horizon: f64) -> String {
    format!(
        r#"
format = "ndr-scenario/1"
name = "road"

[simulation]
horizon = {horizon}
speed_factor_spread = 0.0

[[links]]
id = "ab"
from = "A"
to = "B"
length = {length}
free_flow_speed = {speed}
lanes = 1

[[zones]]
id = "za"
node = "A"

[[zones]]
id = "zb"
node = "B"

[demand]
slice_seconds = 600.0
fleet_mix = {{ car = 1.0 }}

[[demand.od]]
origin = "za"
destination = "zb"
rates = [{rate_veh_h}]
"#
    )
}

/// One signalized junction J between an approach `in` and an exit `out`,
/// plus a conflicting side approach, with greens (g_through, g_side).
pub fn signal_pair(g_through: f64, g_side: f64, rate_veh_h: f64, horizon: f64) -> String {
    format!(
        r#"
format = "ndr-scenario/1"
name = "signal"

[simulation]
horizon = {horizon}
speed_factor_spread = 0.0

[[links]]
id = "in"
from = "W"
to = "J"
length = 300.0
free_flow_speed = 13.9
lanes = 1

[[links]]
id = "out"
from = "J"
to = "E"
length = 200.0
free_flow_speed = 13.9
lanes = 1

[[links]]
id = "side"
from = "S"
to = "J"
length = 200.0
free_flow_speed = 13.9
lanes = 1

[[links]]
id = "side_out"
from = "J"
to = "N"
length = 200.0
free_flow_speed = 13.9
lanes = 1

[[junctions]]
id = "J"
node = "J"
cycle_time = 60.0
lost_time = 6.0

[[phases]]
junction = "J"
id = "through"
movements = [["in", "out"]]
g_min = 5.0
g_max = 49.0
default_green = {g_through}

[[phases]]
junction = "J"
id = "cross"
movements = [["side", "side_out"]]
g_min = 5.0
g_max = 49.0
default_green = {g_side}

[[detectors]]
id = "d_in"
link = "in"
position = 100.0
period = 60.0

[[zones]]
id = "zw"
node = "W"

[[zones]]
id = "ze"
node = "E"

[[zones]]
id = "zs"
node = "S"

[[zones]]
id = "zn"
node = "N"

[demand]
slice_seconds = 600.0
fleet_mix = {{ car = 1.0 }}

[[demand.od]]
origin = "zw"
destination = "ze"
rates = [{rate_veh_h}]

[control]
junctions = ["J"]
"#
    )
}
