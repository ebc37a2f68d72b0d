//! Stable CSV exports.
//!
//! Trajectories: `t,vehicle_id,class,link_id,position_m,speed_mps,accel_mps2`.
//! Trips: `vehicle_id,class,depart_s,arrive_s,free_flow_s`, with an empty
//! `arrive_s` for vehicles still travelling at the horizon.

use std::io::Write;

use super::{TrajectoryPoint, TripRecord};
use crate::network::TrafficNetwork;
use crate::Result;

pub fn write_trajectories_csv<W: Write>(points: &[TrajectoryPoint], net: &TrafficNetwork, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "vehicle_id", "class", "link_id", "position_m", "speed_mps", "accel_mps2"])?;
    for p in points {
        w.write_record([
            p.t.to_string(),
            p.vehicle_id.to_string(),
            p.class.to_string(),
            net.links[p.link].id.clone(),
            p.position.to_string(),
            p.speed.to_string(),
            p.accel.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trips_csv<W: Write>(trips: &[TripRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vehicle_id", "class", "depart_s", "arrive_s", "free_flow_s"])?;
    for t in trips {
        w.write_record([
            t.vehicle_id.to_string(),
            t.class.to_string(),
            t.depart.to_string(),
            t.arrive.map(|a| a.to_string()).unwrap_or_default(),
            t.free_flow_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
