mod common;

use common::{corridor2, scenario, signal_pair, straight_road};
use ndr_core::microsim::{
    run_simulation, run_simulation_with_sink, write_trajectories_csv, write_trips_csv,
    ControlDecision, ControlRequest, FixedTiming, Simulation,
};
use ndr_core::network::VehicleClass;
use ndr_core::Error;

fn run_to_end(sim: &mut Simulation<'_>) {
    while !sim.is_finished() {
        sim.step(&mut FixedTiming, &mut ()).unwrap();
    }
}

fn step_until(sim: &mut Simulation<'_>, t: f64) {
    while sim.time() < t {
        sim.step(&mut FixedTiming, &mut ()).unwrap();
    }
}

#[test]
fn zero_demand_is_empty() {
    let sc = scenario(&signal_pair(27.0, 27.0, 0.0, 600.0));
    let out = run_simulation(&sc, &mut FixedTiming, 1).unwrap();
    assert!(out.trips.is_empty());
    assert_eq!(out.departed, 0);
    assert!(out.detector_log.counts.iter().flatten().all(|&c| c == 0));
    assert!(out.queue_stats.mean_per_link.iter().all(|&q| q == 0.0));
    assert!(out.trajectories.is_empty());
}

#[test]
fn single_vehicle_kinematics() {
    let sc = scenario(&straight_road(500.0, 10.0, 0.0, 120.0));
    let mut sim = Simulation::new(&sc, 0);
    sim.insert_vehicle(VehicleClass::Car, vec![0], 0.0, 10.0);
    run_to_end(&mut sim);
    let out = sim.finish();
    assert_eq!(out.completed, 1);
    let trip = &out.trips[0];
    assert_eq!(trip.free_flow_time, 50.0);
    let travel = trip.arrive.unwrap() - trip.depart;
    assert!((travel - 50.0).abs() <= sc.simulation.dt, "travel time {travel}");
}

#[test]
fn free_road_accelerates() {
    let sc = scenario(&straight_road(500.0, 13.9, 0.0, 60.0));
    let mut sim = Simulation::new(&sc, 0);
    sim.insert_vehicle(VehicleClass::Car, vec![0], 10.0, 5.0);
    sim.step(&mut FixedTiming, &mut ()).unwrap();
    let (_, _, speed, accel) = sim.vehicles_on(0)[0];
    assert!(accel > 0.0);
    assert!(speed > 5.0);
}

#[test]
fn brakes_for_red_signal() {
    // Through phase is green for the first 5 s of every 60 s cycle.
    let sc = scenario(&signal_pair(5.0, 49.0, 0.0, 120.0));
    let mut sim = Simulation::new(&sc, 0);
    step_until(&mut sim, 10.0);
    sim.insert_vehicle(VehicleClass::Car, vec![0, 1], 270.0, 10.0);
    sim.step(&mut FixedTiming, &mut ()).unwrap();
    let (_, pos, _, accel) = sim.vehicles_on(0)[0];
    assert!(accel < 0.0);
    step_until(&mut sim, 55.0);
    let (_, pos_later, speed, _) = sim.vehicles_on(0)[0];
    assert!(pos_later > pos && pos_later <= 300.0);
    assert!(speed < 0.1);
}

#[test]
fn follower_stops_behind_stopped_leader() {
    let sc = scenario(&signal_pair(5.0, 49.0, 0.0, 120.0));
    let mut sim = Simulation::new(&sc, 0);
    step_until(&mut sim, 6.0);
    sim.insert_vehicle(VehicleClass::Car, vec![0, 1], 299.0, 0.0);
    sim.insert_vehicle(VehicleClass::Car, vec![0, 1], 260.0, 8.0);
    step_until(&mut sim, 55.0);
    let v = sim.vehicles_on(0);
    let (lead_pos, follow_pos, follow_speed) = (v[0].1, v[1].1, v[1].2);
    assert!(follow_speed < 0.05, "{follow_speed}");
    // Front-to-front spacing approaches length 5 m + jam spacing 2 m.
    let spacing = lead_pos - follow_pos;
    assert!((6.5..8.5).contains(&spacing), "{spacing}");
}

#[test]
fn queue_counts_stopped_vehicles() {
    let sc = scenario(&signal_pair(5.0, 49.0, 0.0, 120.0));
    let mut sim = Simulation::new(&sc, 0);
    assert_eq!(sim.queue_length(0), 0);
    step_until(&mut sim, 6.0);
    for k in 0..5 {
        sim.insert_vehicle(VehicleClass::Car, vec![0, 1], 299.0 - 7.0 * k as f64, 0.0);
    }
    sim.step(&mut FixedTiming, &mut ()).unwrap();
    assert_eq!(sim.queue_length(0), 5);

    let mut moving = Simulation::new(&sc, 0);
    moving.insert_vehicle(VehicleClass::Car, vec![0, 1], 0.0, 13.9);
    moving.step(&mut FixedTiming, &mut ()).unwrap();
    assert_eq!(moving.queue_length(0), 0);
}

#[test]
fn conservation_every_step() {
    let sc = corridor2();
    let mut sim = Simulation::new(&sc, 3);
    while !sim.is_finished() {
        sim.step(&mut FixedTiming, &mut ()).unwrap();
        assert_eq!(sim.departed(), sim.completed() + sim.in_network());
    }
    let out = sim.finish();
    assert!(out.conservation_ok);
    assert_eq!(out.trips.len() as u64, out.departed);
    let done = out.trips.iter().filter(|t| t.arrive.is_some()).count() as u64;
    assert_eq!(done, out.completed);
    for t in &out.trips {
        if let Some(a) = t.arrive {
            assert!(a >= t.depart);
        }
    }
}

#[test]
fn same_seed_same_output() {
    let sc = corridor2();
    let a = run_simulation(&sc, &mut FixedTiming, 9).unwrap();
    let b = run_simulation(&sc, &mut FixedTiming, 9).unwrap();
    assert_eq!(a, b);
    let c = run_simulation(&sc, &mut FixedTiming, 10).unwrap();
    assert_ne!(a.trips, c.trips);
}

#[test]
fn demand_scaling_never_reduces_departures() {
    let sc = corridor2();
    for seed in 0..4 {
        let mut last = 0;
        for k in [1.0, 1.05, 1.3, 2.0] {
            let out = run_simulation_with_sink(&sc.with_demand_scale(k), &mut FixedTiming, seed, &mut ()).unwrap();
            assert!(out.departed >= last, "seed {seed} factor {k}");
            last = out.departed;
        }
    }
}

#[test]
fn detector_counts_match_crossings() {
    let sc = scenario(&straight_road(500.0, 10.0, 0.0, 120.0).replacen(
        "[[zones]]",
        "[[detectors]]\nid = \"d\"\nlink = \"ab\"\nposition = 250.0\nperiod = 30.0\n\n[[zones]]",
        1,
    ));
    let mut sim = Simulation::new(&sc, 0);
    sim.insert_vehicle(VehicleClass::Car, vec![0], 0.0, 10.0);
    sim.insert_vehicle(VehicleClass::Car, vec![0], 200.0, 10.0);
    run_to_end(&mut sim);
    let counts = &sim.finish().detector_log.counts[0];
    // Front bumpers pass 250 m at t = 5 s and t = 25 s.
    assert_eq!(counts[0], 2);
    assert_eq!(counts.iter().sum::<u32>(), 2);
}

#[test]
fn controller_output_is_checked() {
    let sc = scenario(&signal_pair(27.0, 27.0, 100.0, 60.0));
    let mut bad = |_: &ControlRequest<'_>| -> ndr_core::Result<ControlDecision> { Ok(vec![(0, vec![50.0, 50.0])]) };
    assert!(matches!(
        run_simulation(&sc, &mut bad, 0),
        Err(Error::InfeasibleControl { .. })
    ));
    let mut wrong_len = |_: &ControlRequest<'_>| -> ndr_core::Result<ControlDecision> { Ok(vec![(0, vec![54.0])]) };
    assert!(run_simulation(&sc, &mut wrong_len, 0).is_err());
}

#[test]
fn new_greens_apply_at_next_cycle() {
    let mut sc = scenario(&signal_pair(27.0, 27.0, 0.0, 200.0));
    sc.simulation.control_period = 90.0;
    let mut ctl = |_: &ControlRequest<'_>| -> ndr_core::Result<ControlDecision> { Ok(vec![(0, vec![40.0, 14.0])]) };
    let mut sim = Simulation::new(&sc, 0);
    // The t = 0 decision takes effect at the cycle starting at t = 0.
    sim.step(&mut ctl, &mut ()).unwrap();
    assert_eq!(sim.signal(0).greens, vec![40.0, 14.0]);
    let mut alt = |r: &ControlRequest<'_>| -> ndr_core::Result<ControlDecision> {
        Ok(vec![(0, if r.time > 0.0 { vec![20.0, 34.0] } else { vec![40.0, 14.0] })])
    };
    let mut sim = Simulation::new(&sc, 0);
    while sim.time() <= 90.0 {
        sim.step(&mut alt, &mut ()).unwrap();
    }
    // Decided at t = 90, mid-cycle; the running cycle keeps its greens.
    assert_eq!(sim.signal(0).greens, vec![40.0, 14.0]);
    assert!(sim.signal(0).pending.is_some());
    while sim.time() <= 120.0 {
        sim.step(&mut alt, &mut ()).unwrap();
    }
    assert_eq!(sim.signal(0).greens, vec![20.0, 34.0]);
}

#[test]
fn gridlock_is_flagged_not_fatal() {
    let mut sc = scenario(&signal_pair(5.0, 49.0, 0.0, 60.0));
    sc.simulation.gridlock_span = 20.0;
    let mut sim = Simulation::new(&sc, 0);
    step_until(&mut sim, 6.0);
    sim.insert_vehicle(VehicleClass::Car, vec![0, 1], 299.0, 0.0);
    run_to_end(&mut sim);
    let out = sim.finish();
    assert!(out.gridlock.is_some());
}

#[test]
fn vehicles_stay_ordered_on_links() {
    let sc = corridor2();
    let mut sim = Simulation::new(&sc, 4);
    while !sim.is_finished() {
        sim.step(&mut FixedTiming, &mut ()).unwrap();
        for l in 0..sc.network.links.len() {
            let v = sim.vehicles_on(l);
            for pair in v.windows(2) {
                assert!(pair[0].1 > pair[1].1, "overtaking on link {l} at t={}", sim.time());
            }
            for &(_, pos, speed, accel) in &v {
                assert!((0.0..=sc.network.links[l].length).contains(&pos));
                assert!(speed >= 0.0);
                assert!(accel.abs() <= 5.0);
            }
        }
    }
}

#[test]
fn csv_exports() {
    let sc = scenario(&straight_road(100.0, 10.0, 0.0, 20.0));
    let mut sim = Simulation::new(&sc, 0);
    sim.insert_vehicle(VehicleClass::Car, vec![0], 0.0, 10.0);
    let mut points = Vec::new();
    while !sim.is_finished() {
        sim.step(&mut FixedTiming, &mut points).unwrap();
    }
    let out = sim.finish();
    let mut buf = Vec::new();
    write_trajectories_csv(&points, &sc.network, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,vehicle_id,class,link_id,position_m,speed_mps,accel_mps2");
    assert!(lines.next().unwrap().starts_with("0,0,car,ab,0,10,"));
    let mut buf = Vec::new();
    write_trips_csv(&out.trips, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("vehicle_id,class,depart_s,arrive_s,free_flow_s\n0,car,0,"));
}
