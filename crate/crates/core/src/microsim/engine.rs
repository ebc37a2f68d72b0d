use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::driver::{idm_acceleration, DriverParams, Lead};
use super::{
    decision_epoch_hook, ControlRequest, DetectorLog, QueueStats, SignalController, SignalState,
    SimClock, TrajectoryPoint, TrajectorySink, TripRecord,
};
use crate::network::{RouteTable, Scenario, VehicleClass};
use crate::{Error, Result};

const STREAM_DEPARTURES: u64 = 1;
const STREAM_CLASSES: u64 = 2;
const STREAM_DRIVERS: u64 = 3;

/// Green-time tolerance when checking controller output.
const CONTROL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
struct Veh {
    id: u64,
    class: VehicleClass,
    od: Option<usize>,
    route: usize,
    leg: usize,
    pos: f64,
    speed: f64,
    accel: f64,
    speed_factor: f64,
    depart: f64,
    committed: bool,
    prev_link: usize,
    prev_pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEvent {
    pub time: f64,
    pub junction: String,
    pub greens: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub seed: u64,
    pub trips: Vec<TripRecord>,
    pub detector_log: DetectorLog,
    /// Empty unless produced by [`run_simulation`].
    pub trajectories: Vec<TrajectoryPoint>,
    pub queue_stats: QueueStats,
    pub departed: u64,
    pub completed: u64,
    /// Time at which gridlock was first detected.
    pub gridlock: Option<f64>,
    /// Whether departed = completed + in-network held after every step.
    pub conservation_ok: bool,
    pub control_log: Vec<ControlEvent>,
}

/// Inverse-CDF Poisson draw. For fixed `u`, the result is non-decreasing in `mean`.
pub(crate) fn poisson_inverse(u: f64, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stateful simulation run. Use [`run_simulation`] for the common case; step
/// manually to observe intermediate states.
pub struct Simulation<'a> {
    sc: &'a Scenario,
    seed: u64,
    controlled: Vec<bool>,
    routes: Vec<Vec<usize>>,
    od_route: Vec<Option<usize>>,
    link_junction: Vec<Option<usize>>,
    movement_phases: BTreeMap<(usize, usize), Vec<usize>>,
    detectors_on_link: Vec<Vec<(usize, f64)>>,
    fleet: Vec<(VehicleClass, f64)>,
    links: Vec<VecDeque<Veh>>,
    entry: Vec<VecDeque<Veh>>,
    signals: Vec<SignalState>,
    detector_log: DetectorLog,
    trips: Vec<TripRecord>,
    queue_sum: Vec<f64>,
    rng_departures: ChaCha8Rng,
    rng_classes: ChaCha8Rng,
    rng_drivers: ChaCha8Rng,
    step: u64,
    n_steps: u64,
    next_id: u64,
    departed: u64,
    completed: u64,
    last_move: f64,
    gridlock: Option<f64>,
    conservation_ok: bool,
    control_log: Vec<ControlEvent>,
    accel_buf: Vec<Vec<f64>>,
}

impl<'a> Simulation<'a> {
    pub fn new(sc: &'a Scenario, seed: u64) -> Self {
        let net = &sc.network;
        let table = RouteTable::build(net, &sc.demand);
        let mut routes = Vec::new();
        let od_route = sc
            .demand
            .od
            .iter()
            .map(|od| {
                table.get(&od.origin, &od.destination).map(|r| {
                    routes.push(r.to_vec());
                    routes.len() - 1
                })
            })
            .collect();
        let link_junction = net.links.iter().map(|l| net.junction_at_node(&l.to)).collect();
        let mut movement_phases: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for j in &net.junctions {
            for (pi, p) in j.phases.iter().enumerate() {
                for (a, b) in &p.movements {
                    if let (Some(a), Some(b)) = (net.link_idx(a), net.link_idx(b)) {
                        movement_phases.entry((a, b)).or_default().push(pi);
                    }
                }
            }
        }
        let mut detectors_on_link = vec![Vec::new(); net.links.len()];
        for (di, d) in net.detectors.iter().enumerate() {
            if let Some(li) = net.link_idx(&d.link) {
                detectors_on_link[li].push((di, d.position));
            }
        }
        let period = net
            .detectors
            .first()
            .map(|d| d.period)
            .unwrap_or(120.0);
        let s = &sc.simulation;
        let n_links = net.links.len();
        Self {
            sc,
            seed,
            controlled: net
                .junctions
                .iter()
                .map(|j| sc.scope.controlled_junctions.contains(&j.junction_id))
                .collect(),
            routes,
            od_route,
            link_junction,
            movement_phases,
            detectors_on_link,
            fleet: sc
                .demand
                .fleet_mix
                .iter()
                .filter(|(_, &share)| share > 0.0)
                .map(|(&c, &share)| (c, share))
                .collect(),
            links: vec![VecDeque::new(); n_links],
            entry: vec![VecDeque::new(); n_links],
            signals: net.junctions.iter().map(SignalState::new).collect(),
            detector_log: DetectorLog::new(net.detectors.len(), period, s.horizon),
            trips: Vec::new(),
            queue_sum: vec![0.0; n_links],
            rng_departures: stream(seed, STREAM_DEPARTURES),
            rng_classes: stream(seed, STREAM_CLASSES),
            rng_drivers: stream(seed, STREAM_DRIVERS),
            step: 0,
            n_steps: (s.horizon / s.dt).round() as u64,
            next_id: 0,
            departed: 0,
            completed: 0,
            last_move: 0.0,
            gridlock: None,
            conservation_ok: true,
            control_log: Vec::new(),
            accel_buf: vec![Vec::new(); n_links],
        }
    }

    pub fn clock(&self) -> SimClock {
        SimClock {
            step: self.step,
            dt: self.sc.simulation.dt,
            horizon: self.sc.simulation.horizon,
        }
    }

    pub fn time(&self) -> f64 {
        self.clock().time()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn departed(&self) -> u64 {
        self.departed
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Vehicles on links plus those waiting to enter at their origin.
    pub fn in_network(&self) -> u64 {
        self.links
            .iter()
            .chain(self.entry.iter())
            .map(|q| q.len() as u64)
            .sum()
    }

    pub fn signal(&self, junction: usize) -> &SignalState {
        &self.signals[junction]
    }

    /// Vehicles on `link` with speed below the stopped threshold.
    pub fn queue_length(&self, link: usize) -> usize {
        let thr = self.sc.simulation.stopped_speed;
        self.links[link].iter().filter(|v| v.speed < thr).count()
    }

    /// (vehicle id, position, speed, accel) for vehicles on `link`, downstream first.
    pub fn vehicles_on(&self, link: usize) -> Vec<(u64, f64, f64, f64)> {
        self.links[link]
            .iter()
            .map(|v| (v.id, v.pos, v.speed, v.accel))
            .collect()
    }

    fn driver(&self, class: VehicleClass) -> &'a DriverParams {
        &self.sc.drivers.0[&class]
    }

    fn desired_speed(&self, v: &Veh, link: usize) -> f64 {
        let p = self.driver(v.class);
        p.desired_speed.min(self.sc.network.links[link].free_flow_speed) * v.speed_factor
    }

    fn lane_scale(&self, link: usize) -> f64 {
        1.0 / self.sc.network.links[link].lanes as f64
    }

    fn eff_length(&self, v: &Veh, link: usize) -> f64 {
        self.driver(v.class).length * self.lane_scale(link)
    }

    /// Place a vehicle directly on the first link of `route`, bypassing
    /// demand generation.
    pub fn insert_vehicle(&mut self, class: VehicleClass, route: Vec<usize>, pos: f64, speed: f64) -> u64 {
        let link = route[0];
        self.routes.push(route);
        let id = self.next_id;
        self.next_id += 1;
        let veh = Veh {
            id,
            class,
            od: None,
            route: self.routes.len() - 1,
            leg: 0,
            pos,
            speed,
            accel: 0.0,
            speed_factor: 1.0,
            depart: self.time(),
            committed: false,
            prev_link: link,
            prev_pos: pos,
        };
        let q = &mut self.links[link];
        let at = q.iter().position(|v| v.pos < pos).unwrap_or(q.len());
        q.insert(at, veh);
        self.departed += 1;
        id
    }

    fn apply_control(&mut self, controller: &mut dyn SignalController, t: f64) -> Result<()> {
        let req = ControlRequest {
            time: t,
            detectors: &self.detector_log,
        };
        let decision = controller.decide(&req)?;
        let net = &self.sc.network;
        for (j, greens) in decision {
            let plan = net.junctions.get(j).ok_or_else(|| Error::InfeasibleControl {
                junction: format!("#{j}"),
                reason: "no such junction".into(),
            })?;
            let fail = |reason: String| Error::InfeasibleControl {
                junction: plan.junction_id.clone(),
                reason,
            };
            if !self.controlled[j] {
                return Err(fail("junction is outside the control scope".into()));
            }
            if greens.len() != plan.phases.len() {
                return Err(fail(format!(
                    "{} green times for {} phases",
                    greens.len(),
                    plan.phases.len()
                )));
            }
            for (g, p) in greens.iter().zip(&plan.phases) {
                if !(g.is_finite() && *g >= p.g_min - CONTROL_TOL && *g <= p.g_max + CONTROL_TOL) {
                    return Err(fail(format!(
                        "phase {} green {g} outside [{}, {}]",
                        p.id, p.g_min, p.g_max
                    )));
                }
            }
            let sum: f64 = greens.iter().sum();
            if (sum - plan.budget()).abs() > CONTROL_TOL {
                return Err(fail(format!(
                    "greens sum to {sum}, budget is {}",
                    plan.budget()
                )));
            }
            self.control_log.push(ControlEvent {
                time: t,
                junction: plan.junction_id.clone(),
                greens: greens.clone(),
            });
            self.signals[j].pending = Some(greens);
        }
        Ok(())
    }

    fn generate_departures(&mut self, t: f64) {
        let dt = self.sc.simulation.dt;
        let spread = self.sc.simulation.speed_factor_spread;
        let demand = &self.sc.demand;
        for (i, od) in demand.od.iter().enumerate() {
            // One uniform per OD per step regardless of the rate keeps the
            // stream aligned across demand scalings.
            let u: f64 = self.rng_departures.random();
            let n = poisson_inverse(u, demand.rate_per_second(od, t) * dt);
            let Some(route) = self.od_route[i] else {
                continue;
            };
            for _ in 0..n {
                let class = self.draw_class();
                let speed_factor = 1.0 + spread * (2.0 * self.rng_drivers.random::<f64>() - 1.0);
                let first = self.routes[route][0];
                let veh = Veh {
                    id: self.next_id,
                    class,
                    od: Some(i),
                    route,
                    leg: 0,
                    pos: 0.0,
                    speed: 0.0,
                    accel: 0.0,
                    speed_factor,
                    depart: t,
                    committed: false,
                    prev_link: first,
                    prev_pos: 0.0,
                };
                self.next_id += 1;
                self.departed += 1;
                self.entry[first].push_back(veh);
            }
        }
    }

    fn draw_class(&mut self) -> VehicleClass {
        let u: f64 = self.rng_classes.random();
        let mut acc = 0.0;
        for &(c, share) in &self.fleet {
            acc += share;
            if u < acc {
                return c;
            }
        }
        self.fleet.last().map(|f| f.0).unwrap_or(VehicleClass::Car)
    }

    fn insert_from_entry(&mut self) {
        for li in 0..self.links.len() {
            let Some(veh) = self.entry[li].front() else {
                continue;
            };
            let p = self.driver(veh.class);
            let scale = self.lane_scale(li);
            let v0 = self.desired_speed(veh, li);
            let speed = match self.links[li].back() {
                None => v0,
                Some(back) => {
                    let gap = back.pos - self.eff_length(back, li);
                    let s0 = p.jam_spacing * scale;
                    if gap < s0 + self.sc.simulation.min_gap {
                        continue;
                    }
                    v0.min(back.speed).min(((gap - s0) / (p.time_headway * scale)).max(0.0))
                }
            };
            let mut veh = self.entry[li].pop_front().expect("checked non-empty");
            veh.speed = speed;
            veh.pos = 0.0;
            veh.prev_pos = 0.0;
            veh.prev_link = li;
            self.links[li].push_back(veh);
        }
    }

    fn movement_green(&self, from: usize, to: usize, t: f64) -> bool {
        let Some(j) = self.link_junction[from] else {
            return true;
        };
        let plan = &self.sc.network.junctions[j];
        match self.signals[j].active_phase(plan, t) {
            Some(active) => self
                .movement_phases
                .get(&(from, to))
                .is_some_and(|ps| ps.contains(&active)),
            None => false,
        }
    }

    /// Leader ahead of the front vehicle of `li`: stop line, next link's tail, or nothing.
    /// Also returns a hard cap on the front vehicle's next position.
    fn front_lead(&mut self, li: usize, t: f64) -> (Option<Lead>, f64) {
        let len = self.sc.network.links[li].length;
        let veh = &self.links[li][0];
        let route = &self.routes[veh.route];
        if veh.leg + 1 >= route.len() {
            return (None, f64::INFINITY);
        }
        let next = route[veh.leg + 1];
        let dist = len - veh.pos;
        let green = self.movement_green(li, next, t);
        if !green && !veh.committed {
            let stop_decel = veh.speed * veh.speed / (2.0 * dist.max(1e-6));
            if stop_decel > self.sc.simulation.dilemma_decel {
                self.links[li][0].committed = true;
            } else {
                return (Some(Lead { gap: dist, speed: 0.0 }), len - 0.01);
            }
        }
        match self.links[next].back() {
            None => (None, f64::INFINITY),
            Some(back) => {
                let tail = back.pos - self.eff_length(back, next);
                (
                    Some(Lead {
                        gap: dist + tail,
                        speed: back.speed,
                    }),
                    len + tail - self.sc.simulation.min_gap,
                )
            }
        }
    }

    fn compute_accelerations(&mut self, t: f64) -> Vec<f64> {
        let mut caps = vec![f64::INFINITY; self.links.len()];
        for li in 0..self.links.len() {
            let mut buf = std::mem::take(&mut self.accel_buf[li]);
            buf.clear();
            if !self.links[li].is_empty() {
                let (lead, cap) = self.front_lead(li, t);
                caps[li] = cap;
                let scale = self.lane_scale(li);
                for k in 0..self.links[li].len() {
                    let v = &self.links[li][k];
                    let lead = if k == 0 {
                        lead
                    } else {
                        let l = &self.links[li][k - 1];
                        Some(Lead {
                            gap: l.pos - self.eff_length(l, li) - v.pos,
                            speed: l.speed,
                        })
                    };
                    let desired = self.desired_speed(v, li);
                    buf.push(idm_acceleration(self.driver(v.class), v.speed, desired, lead, scale));
                }
            }
            self.accel_buf[li] = buf;
        }
        caps
    }

    fn move_vehicles(&mut self, t: f64, caps: &[f64], sink: &mut dyn TrajectorySink) -> bool {
        let dt = self.sc.simulation.dt;
        let min_gap = self.sc.simulation.min_gap;
        let mut any_moved = false;
        for li in 0..self.links.len() {
            let mut leader: Option<(f64, f64)> = None; // (tail position, speed) after update
            for k in 0..self.links[li].len() {
                let a = self.accel_buf[li][k];
                let eff_len = self.eff_length(&self.links[li][k], li);
                let v = &mut self.links[li][k];
                v.prev_link = li;
                v.prev_pos = v.pos;
                let (x0, v0) = (v.pos, v.speed);
                let mut v1 = v0 + a * dt;
                let mut x1 = if v1 < 0.0 {
                    v1 = 0.0;
                    if a < 0.0 {
                        x0 - v0 * v0 / (2.0 * a)
                    } else {
                        x0
                    }
                } else {
                    x0 + v0 * dt + 0.5 * a * dt * dt
                };
                let cap = match leader {
                    None => caps[li],
                    Some((tail, _)) => tail - min_gap,
                };
                if x1 > cap {
                    x1 = cap.max(x0);
                    v1 = match leader {
                        Some((_, s)) => v1.min(s),
                        None => 0.0,
                    };
                }
                let a_eff = (v1 - v0) / dt;
                sink.record(&TrajectoryPoint {
                    t,
                    vehicle_id: v.id,
                    class: v.class,
                    link: li,
                    position: x0,
                    speed: v0,
                    accel: a_eff,
                });
                if x1 > x0 {
                    any_moved = true;
                }
                v.pos = x1;
                v.speed = v1;
                v.accel = a_eff;
                leader = Some((x1 - eff_len, v1));
            }
        }
        any_moved
    }

    fn transfer(&mut self, t: f64) {
        let dt = self.sc.simulation.dt;
        let min_gap = self.sc.simulation.min_gap;
        for li in 0..self.links.len() {
            let len = self.sc.network.links[li].length;
            while let Some(front) = self.links[li].front() {
                if front.pos < len {
                    break;
                }
                let route = &self.routes[front.route];
                if front.leg + 1 >= route.len() {
                    let v = self.links[li].pop_front().expect("front exists");
                    let travelled = v.pos - v.prev_pos;
                    let frac = if travelled > 0.0 && v.prev_pos.is_finite() {
                        ((len - v.prev_pos) / travelled).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    self.record_crossings(&v, li, len);
                    self.complete(v, t + dt * frac);
                    continue;
                }
                let next = route[front.leg + 1];
                let new_pos = front.pos - len;
                let blocked = self.links[next]
                    .back()
                    .is_some_and(|b| new_pos > b.pos - self.eff_length(b, next) - min_gap);
                if blocked {
                    let back_speed = self.links[next].back().map(|b| b.speed).unwrap_or(0.0);
                    let f = self.links[li].front_mut().expect("front exists");
                    f.pos = len - 1e-9;
                    f.speed = f.speed.min(back_speed);
                    break;
                }
                let mut v = self.links[li].pop_front().expect("front exists");
                self.record_crossings(&v, li, len);
                v.leg += 1;
                v.pos = new_pos;
                v.prev_link = next;
                v.prev_pos = f64::NEG_INFINITY;
                v.committed = false;
                self.links[next].push_back(v);
            }
        }
    }

    /// Count detector crossings on `link` between the vehicle's previous
    /// position and `upto`.
    fn record_crossings(&mut self, v: &Veh, link: usize, upto: f64) {
        let t = self.time();
        for &(d, p) in &self.detectors_on_link[link] {
            if v.prev_pos < p && p <= upto {
                self.detector_log.bump(d, t);
            }
        }
    }

    fn count_remaining_crossings(&mut self) {
        let t = self.time();
        for li in 0..self.links.len() {
            if self.detectors_on_link[li].is_empty() {
                continue;
            }
            for k in 0..self.links[li].len() {
                let (prev, pos) = (self.links[li][k].prev_pos, self.links[li][k].pos);
                for &(d, p) in &self.detectors_on_link[li] {
                    if prev < p && p <= pos {
                        self.detector_log.bump(d, t);
                    }
                }
                // Counted; later steps start from here.
                self.links[li][k].prev_pos = pos;
            }
        }
    }

    fn complete(&mut self, v: Veh, arrive: f64) {
        self.completed += 1;
        let trip = self.trip_record(&v, Some(arrive));
        self.trips.push(trip);
    }

    fn trip_record(&self, v: &Veh, arrive: Option<f64>) -> TripRecord {
        let net = &self.sc.network;
        let route = &self.routes[v.route];
        let (origin, destination) = match v.od {
            Some(i) => (
                self.sc.demand.od[i].origin.clone(),
                self.sc.demand.od[i].destination.clone(),
            ),
            None => (String::new(), String::new()),
        };
        TripRecord {
            vehicle_id: v.id,
            class: v.class,
            origin,
            destination,
            depart: v.depart,
            arrive,
            free_flow_time: route.iter().map(|&l| net.links[l].free_flow_time()).sum(),
            route_length: route.iter().map(|&l| net.links[l].length).sum(),
        }
    }

    /// Advance one time step.
    pub fn step(&mut self, controller: &mut dyn SignalController, sink: &mut dyn TrajectorySink) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let t = self.time();
        if decision_epoch_hook(&self.clock(), self.sc.simulation.control_period) {
            self.apply_control(controller, t)?;
        }
        for (j, plan) in self.sc.network.junctions.iter().enumerate() {
            self.signals[j].update(plan, t);
        }
        self.generate_departures(t);
        self.insert_from_entry();
        let caps = self.compute_accelerations(t);
        let moved = self.move_vehicles(t, &caps, sink);
        self.transfer(t);
        self.count_remaining_crossings();

        let thr = self.sc.simulation.stopped_speed;
        for (li, q) in self.links.iter().enumerate() {
            self.queue_sum[li] += q.iter().filter(|v| v.speed < thr).count() as f64;
        }
        let on_links: usize = self.links.iter().map(VecDeque::len).sum();
        if moved || on_links == 0 {
            self.last_move = t;
        } else if self.gridlock.is_none() && t - self.last_move >= self.sc.simulation.gridlock_span {
            log::warn!("seed {}: gridlock detected at t={t}", self.seed);
            self.gridlock = Some(t);
        }
        if self.departed != self.completed + self.in_network() {
            self.conservation_ok = false;
        }
        self.step += 1;
        Ok(())
    }

    pub fn finish(self) -> SimOutput {
        let mut trips = self.trips.clone();
        for q in self.links.iter().chain(self.entry.iter()) {
            for v in q {
                trips.push(self.trip_record(v, None));
            }
        }
        trips.sort_by_key(|t| t.vehicle_id);
        let steps = self.step.max(1) as f64;
        SimOutput {
            seed: self.seed,
            trips,
            detector_log: self.detector_log,
            trajectories: Vec::new(),
            queue_stats: QueueStats {
                mean_per_link: self.queue_sum.iter().map(|s| s / steps).collect(),
            },
            departed: self.departed,
            completed: self.completed,
            gridlock: self.gridlock,
            conservation_ok: self.conservation_ok,
            control_log: self.control_log,
        }
    }
}

/// Run a full horizon, streaming trajectory points into `sink`.
pub fn run_simulation_with_sink(
    sc: &Scenario,
    controller: &mut dyn SignalController,
    seed: u64,
    sink: &mut dyn TrajectorySink,
) -> Result<SimOutput> {
    let mut sim = Simulation::new(sc, seed);
    while !sim.is_finished() {
        sim.step(controller, sink)?;
    }
    Ok(sim.finish())
}

/// Run a full horizon and keep every trajectory point in the output.
pub fn run_simulation(sc: &Scenario, controller: &mut dyn SignalController, seed: u64) -> Result<SimOutput> {
    let mut points = Vec::new();
    let mut out = run_simulation_with_sink(sc, controller, seed, &mut points)?;
    out.trajectories = points;
    Ok(out)
}
