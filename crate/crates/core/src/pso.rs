//! Particle swarm optimization over a box.
//!
//! Each iteration updates every particle with
//! `V ← ω_k·V + c₁·r₁·(P − X) + c₂·r₂·(G − X)` and `X ← clamp(X + V)`,
//! with r₁, r₂ drawn afresh for every coordinate, evaluates the objective
//! at the new positions, then merges personal and
//! global bests in particle order. Objective evaluations within an iteration
//! may run concurrently; random draws come from per-particle, per-iteration
//! streams so the trajectory does not depend on scheduling.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{map_ordered, ExecMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InertiaSchedule {
    Constant { value: f64 },
    /// Linear from `start` at the first iteration to `end` at the last.
    Linear { start: f64, end: f64 },
}

impl InertiaSchedule {
    pub fn at(&self, k: usize, max_iterations: usize) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Linear { start, end } => {
                if max_iterations <= 1 {
                    start
                } else {
                    let frac = (k as f64 / (max_iterations - 1) as f64).min(1.0);
                    start + (end - start) * frac
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub population: usize,
    pub inertia: InertiaSchedule,
    pub cognitive: f64,
    pub social: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Stop after this many iterations without strict improvement of gbest.
    pub no_improvement_window: usize,
    pub max_iterations: usize,
    /// Velocity components are capped at this fraction of the box width.
    pub velocity_cap: f64,
    pub seed: u64,
    /// Initial positions are drawn from this range intersected with the box;
    /// `None` uses the whole box.
    #[serde(default)]
    pub init_range: Option<(f64, f64)>,
    #[serde(default)]
    pub exec: ExecMode,
}

impl PsoConfig {
    /// Defaults: linear inertia 0.9 → 0.4, c₁ = c₂ = 2, velocity cap half the box.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, population: usize, max_iterations: usize, seed: u64) -> Self {
        Self {
            population,
            inertia: InertiaSchedule::Linear { start: 0.9, end: 0.4 },
            cognitive: 2.0,
            social: 2.0,
            lower,
            upper,
            no_improvement_window: max_iterations.max(1),
            max_iterations,
            velocity_cap: 0.5,
            seed,
            init_range: None,
            exec: ExecMode::default(),
        }
    }

    pub fn uniform_box(dim: usize, lo: f64, hi: f64, population: usize, max_iterations: usize, seed: u64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim], population, max_iterations, seed)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.population < 1 {
            return bad("population must be at least 1");
        }
        if self.no_improvement_window < 1 {
            return bad("no-improvement window must be at least 1");
        }
        if self.lower.len() != self.upper.len() {
            return bad("box bounds differ in length");
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return bad("box bounds must be finite with lower <= upper");
        }
        if let Some((a, b)) = self.init_range {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return bad("initialization range must be finite with lo <= hi");
            }
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0) {
            return bad("acceleration coefficients must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Objective at `position`; `None` if the evaluation was non-finite.
    pub value: Option<f64>,
    pub best_position: Vec<f64>,
    /// +inf until a finite evaluation has been seen.
    #[serde(with = "inf_as_null")]
    pub best_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoState {
    pub iteration: usize,
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    #[serde(with = "inf_as_null")]
    pub global_best_value: f64,
    /// gbest value after initialization and after every iteration.
    #[serde(with = "inf_as_null::vec")]
    pub history: Vec<f64>,
    pub evaluations: u64,
    pub non_finite_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub best: f64,
    pub mean: f64,
    pub wall_seconds: f64,
}

/// Observes progress; called once after initialization (k = 0) and after each iteration.
pub trait ProgressSink {
    fn on_iteration(&mut self, record: &IterationRecord, state: &PsoState) -> Result<()>;
}

impl ProgressSink for () {
    fn on_iteration(&mut self, _: &IterationRecord, _: &PsoState) -> Result<()> {
        Ok(())
    }
}

impl ProgressSink for Vec<IterationRecord> {
    fn on_iteration(&mut self, record: &IterationRecord, _: &PsoState) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Writes the progress CSV line by line and a JSON checkpoint of the full
/// state after every iteration.
pub struct FileProgress {
    pub log: Option<csv::Writer<std::fs::File>>,
    pub checkpoint: Option<PathBuf>,
}

impl FileProgress {
    pub fn new(log_path: Option<PathBuf>, checkpoint: Option<PathBuf>) -> Result<Self> {
        let log = match log_path {
            Some(p) => {
                let mut w = csv::Writer::from_path(p)?;
                w.write_record(["k", "best", "mean", "wall_seconds"])?;
                Some(w)
            }
            None => None,
        };
        Ok(Self { log, checkpoint })
    }
}

impl ProgressSink for FileProgress {
    fn on_iteration(&mut self, r: &IterationRecord, state: &PsoState) -> Result<()> {
        if let Some(w) = &mut self.log {
            w.write_record([
                r.k.to_string(),
                r.best.to_string(),
                r.mean.to_string(),
                format!("{:.3}", r.wall_seconds),
            ])?;
            w.flush()?;
        }
        if let Some(path) = &self.checkpoint {
            crate::atomic_write(path, &serde_json::to_vec(state)?)?;
        }
        Ok(())
    }
}

pub fn load_checkpoint(path: impl AsRef<std::path::Path>) -> Result<PsoState> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<f64>,
    pub state: PsoState,
}

pub fn clamp_to_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

/// True iff the last strict improvement of `history` is at least `window`
/// iterations old, or the iteration count `history.len() - 1` has reached `max_iterations`.
pub fn stopping_rule(history: &[f64], window: usize, max_iterations: usize) -> bool {
    let k = history.len().saturating_sub(1);
    if k >= max_iterations {
        return true;
    }
    let last_improvement = (1..history.len())
        .rev()
        .find(|&j| history[j] < history[j - 1])
        .unwrap_or(0);
    k - last_improvement >= window
}

fn particle_rng(seed: u64, particle: usize, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(particle as u64);
    rng
}

/// JSON has no infinities; an unset best is written as `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?
                .into_iter()
                .map(|x| x.unwrap_or(f64::INFINITY))
                .collect())
        }
    }
}

fn evaluate<F>(f: &F, cfg: &PsoConfig, state: &mut PsoState, positions: &[Vec<f64>]) -> Vec<Option<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = map_ordered(cfg.exec, positions, |_, x| Some(f(x)).filter(|v| v.is_finite()));
    state.evaluations += values.len() as u64;
    for (i, v) in values.iter().enumerate() {
        if v.is_none() {
            state.non_finite_evaluations += 1;
            log::warn!("pso: non-finite objective for particle {i} at iteration {}", state.iteration);
        }
    }
    values
}

fn update_global(state: &mut PsoState) -> bool {
    let mut best: Option<usize> = None;
    for (i, p) in state.particles.iter().enumerate() {
        if p.best_value < best.map_or(f64::INFINITY, |b| state.particles[b].best_value) {
            best = Some(i);
        }
    }
    match best {
        Some(i) if state.particles[i].best_value < state.global_best_value => {
            state.global_best = state.particles[i].best_position.clone();
            state.global_best_value = state.particles[i].best_value;
            true
        }
        _ => false,
    }
}

fn mean_finite(values: &[Option<f64>]) -> f64 {
    let finite: Vec<f64> = values.iter().flatten().copied().collect();
    if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

/// Random positions in the box (or the initialization range) and velocities
/// within the cap, then one evaluation each.
pub fn initialize<F>(f: &F, cfg: &PsoConfig) -> Result<PsoState>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.check()?;
    let mut positions = Vec::with_capacity(cfg.population);
    let mut velocities = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let mut rng = particle_rng(cfg.seed, i, 0);
        let x: Vec<f64> = cfg
            .lower
            .iter()
            .zip(&cfg.upper)
            .map(|(&l, &u)| {
                let (lo, hi) = match cfg.init_range {
                    Some((a, b)) if a.max(l) <= b.min(u) => (a.max(l), b.min(u)),
                    _ => (l, u),
                };
                lo + rng.random::<f64>() * (hi - lo)
            })
            .collect();
        let v: Vec<f64> = cfg
            .lower
            .iter()
            .zip(&cfg.upper)
            .map(|(l, u)| cfg.velocity_cap * (u - l) * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        positions.push(x);
        velocities.push(v);
    }
    let mut state = PsoState {
        iteration: 0,
        particles: Vec::new(),
        global_best: positions[0].clone(),
        global_best_value: f64::INFINITY,
        history: Vec::new(),
        evaluations: 0,
        non_finite_evaluations: 0,
    };
    let values = evaluate(f, cfg, &mut state, &positions);
    state.particles = positions
        .into_iter()
        .zip(velocities)
        .zip(&values)
        .map(|((x, v), &val)| Particle {
            best_position: x.clone(),
            best_value: val.unwrap_or(f64::INFINITY),
            position: x,
            velocity: v,
            value: val,
        })
        .collect();
    update_global(&mut state);
    state.history.push(state.global_best_value);
    Ok(state)
}

/// One iteration: move every particle, evaluate, then update the bests.
pub fn iterate<F>(f: &F, cfg: &PsoConfig, state: &mut PsoState)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let k = state.iteration;
    let omega = cfg.inertia.at(k, cfg.max_iterations);
    let g = state.global_best.clone();
    for (i, p) in state.particles.iter_mut().enumerate() {
        let mut rng = particle_rng(cfg.seed, i, k + 1);
        for d in 0..p.position.len() {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let cap = cfg.velocity_cap * (cfg.upper[d] - cfg.lower[d]);
            let v = omega * p.velocity[d]
                + cfg.cognitive * r1 * (p.best_position[d] - p.position[d])
                + cfg.social * r2 * (g[d] - p.position[d]);
            p.velocity[d] = v.clamp(-cap, cap);
            p.position[d] += p.velocity[d];
        }
        clamp_to_box(&mut p.position, &cfg.lower, &cfg.upper);
    }
    state.iteration += 1;
    let positions: Vec<Vec<f64>> = state.particles.iter().map(|p| p.position.clone()).collect();
    let values = evaluate(f, cfg, state, &positions);
    for (p, &val) in state.particles.iter_mut().zip(&values) {
        p.value = val;
        if let Some(val) = val.filter(|&v| v < p.best_value) {
            p.best_value = val;
            p.best_position = p.position.clone();
        }
    }
    update_global(state);
    state.history.push(state.global_best_value);
}

/// Continue from a saved state until the stopping rule fires.
pub fn pso_resume<F, S>(f: &F, cfg: &PsoConfig, mut state: PsoState, sink: &mut S) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: ProgressSink + ?Sized,
{
    cfg.check()?;
    let started = Instant::now();
    while !stopping_rule(&state.history, cfg.no_improvement_window, cfg.max_iterations) {
        iterate(f, cfg, &mut state);
        let values: Vec<Option<f64>> = state.particles.iter().map(|p| p.value).collect();
        sink.on_iteration(
            &IterationRecord {
                k: state.iteration,
                best: state.global_best_value,
                mean: mean_finite(&values),
                wall_seconds: started.elapsed().as_secs_f64(),
            },
            &state,
        )?;
    }
    Ok(PsoResult {
        best: state.global_best.clone(),
        best_value: state.global_best_value,
        history: state.history.clone(),
        state,
    })
}

pub fn pso_minimize<F, S>(f: &F, cfg: &PsoConfig, sink: &mut S) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: ProgressSink + ?Sized,
{
    let started = Instant::now();
    let state = initialize(f, cfg)?;
    let values: Vec<Option<f64>> = state.particles.iter().map(|p| p.value).collect();
    sink.on_iteration(
        &IterationRecord {
            k: 0,
            best: state.global_best_value,
            mean: mean_finite(&values),
            wall_seconds: started.elapsed().as_secs_f64(),
        },
        &state,
    )?;
    pso_resume(f, cfg, state, sink)
}
