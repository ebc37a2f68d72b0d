use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::controller::{DecisionLogEntry, NdrController};
use super::kpi::{KpiRecord, KpiSummary};
use crate::decision_rule::{DecisionRuleParams, SensorWindow};
use crate::emissions::{EmissionAccumulator, EmissionRecord};
use crate::exec::{try_map_ordered, ExecMode};
use crate::microsim::{run_simulation_with_sink, FixedTiming, SimOutput, TrajectorySink};
use crate::network::Scenario;
use crate::{Error, Result};

/// Which controller drives the signals during a run.
#[derive(Debug, Clone, Copy)]
pub enum Control<'a> {
    /// Default timings throughout.
    Fixed,
    Ndr {
        params: &'a DecisionRuleParams,
        window: SensorWindow,
    },
}

/// Everything one simulation run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub kpi: KpiRecord,
    pub output: SimOutput,
    pub emissions: EmissionRecord,
    pub decisions: Vec<DecisionLogEntry>,
}

/// Run one seed, accumulating emissions on the fly and forwarding every
/// trajectory point to `extra`.
pub fn simulate_with_sink(
    sc: &Scenario,
    control: Control<'_>,
    seed: u64,
    extra: &mut dyn TrajectorySink,
) -> Result<RunResult> {
    let wrap = |e: Error| Error::Simulation {
        seed,
        source: Box::new(e),
    };
    let mut acc = EmissionAccumulator::new(
        &sc.network,
        &sc.emission_factors,
        sc.simulation.dt,
        sc.demand.slice_seconds,
    );
    let (output, decisions) = match control {
        Control::Fixed => {
            let out = run_simulation_with_sink(sc, &mut FixedTiming, seed, &mut (&mut acc, extra));
            (out.map_err(wrap)?, Vec::new())
        }
        Control::Ndr { params, window } => {
            let mut ctl = NdrController::new(sc, params, window)?;
            let out = run_simulation_with_sink(sc, &mut ctl, seed, &mut (&mut acc, extra));
            (out.map_err(wrap)?, ctl.log)
        }
    };
    let emissions = acc.finish().map_err(wrap)?;
    let kpi = KpiRecord::from_run(&output, &emissions);
    Ok(RunResult {
        kpi,
        output,
        emissions,
        decisions,
    })
}

pub fn simulate(sc: &Scenario, control: Control<'_>, seed: u64) -> Result<RunResult> {
    simulate_with_sink(sc, control, seed, &mut ())
}

/// KPIs for each seed, in seed order.
pub fn run_kpis(sc: &Scenario, control: Control<'_>, seeds: &[u64], exec: ExecMode) -> Result<Vec<KpiRecord>> {
    try_map_ordered(exec, seeds, |_, &seed| simulate(sc, control, seed).map(|r| r.kpi))
}

/// Pearson correlation with a two-sided p-value from Student's t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// `None` for fewer than three pairs or a constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<Correlation> {
    let n = x.len().min(y.len());
    if n < 3 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).ok()?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Some(Correlation { r, p_value, n })
}

/// Paired baseline/candidate evaluation on identical seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seeds: Vec<u64>,
    pub baseline: Vec<KpiRecord>,
    pub candidate: Vec<KpiRecord>,
    pub baseline_mean: KpiSummary,
    pub candidate_mean: KpiSummary,
    /// baseline − candidate, on the means.
    pub delta: KpiSummary,
    /// (baseline − candidate) / baseline, as a percentage of the baseline means.
    pub percent: KpiSummary,
    /// Per-seed delay reduction against CO₂ reduction.
    pub delay_co2: Option<Correlation>,
    /// Per-seed delay reduction against BC reduction.
    pub delay_bc: Option<Correlation>,
}

impl EvaluationReport {
    pub fn from_records(seeds: Vec<u64>, baseline: Vec<KpiRecord>, candidate: Vec<KpiRecord>) -> Self {
        let baseline_mean = KpiSummary::mean(&baseline);
        let candidate_mean = KpiSummary::mean(&candidate);
        let delta = baseline_mean.zip_with(&candidate_mean, |b, c| b - c);
        let percent = baseline_mean.zip_with(&candidate_mean, |b, c| {
            if b == 0.0 {
                0.0
            } else {
                100.0 * (b - c) / b
            }
        });
        let reductions = |f: fn(&KpiRecord) -> f64| -> Vec<f64> {
            baseline.iter().zip(&candidate).map(|(b, c)| f(b) - f(c)).collect()
        };
        let d_delay = reductions(|k| k.mean_delay);
        let delay_co2 = pearson(&d_delay, &reductions(|k| k.co2));
        let delay_bc = pearson(&d_delay, &reductions(|k| k.bc));
        Self {
            seeds,
            baseline,
            candidate,
            baseline_mean,
            candidate_mean,
            delta,
            percent,
            delay_co2,
            delay_bc,
        }
    }
}

/// Evaluate `candidate` against `baseline` on the same seeds.
pub fn evaluate_paired(
    sc: &Scenario,
    baseline: Control<'_>,
    candidate: Control<'_>,
    seeds: &[u64],
    exec: ExecMode,
) -> Result<EvaluationReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one seed".into()));
    }
    let base = run_kpis(sc, baseline, seeds, exec)?;
    let cand = run_kpis(sc, candidate, seeds, exec)?;
    Ok(EvaluationReport::from_records(seeds.to_vec(), base, cand))
}

/// Held-out evaluation of a trained decision rule against fixed timing.
pub fn evaluate_online(
    sc: &Scenario,
    params: &DecisionRuleParams,
    window: SensorWindow,
    seeds: &[u64],
    exec: ExecMode,
) -> Result<EvaluationReport> {
    evaluate_paired(sc, Control::Fixed, Control::Ndr { params, window }, seeds, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor: f64,
    pub report: EvaluationReport,
    /// Candidate means relative to the factor-1.0 row: `value / reference − 1`.
    pub relative: KpiSummary,
    /// Baseline means relative to the factor-1.0 row.
    pub baseline_relative: KpiSummary,
}

/// Re-evaluate at each demand scale factor. The factor-1.0 row is the
/// reference for relative increases and is added if missing.
pub fn demand_sweep(
    sc: &Scenario,
    candidate: Control<'_>,
    factors: &[f64],
    seeds: &[u64],
    exec: ExecMode,
) -> Result<Vec<SweepRow>> {
    if let Some(f) = factors.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid demand factor {f}")));
    }
    let mut all = factors.to_vec();
    if !all.contains(&1.0) {
        all.insert(0, 1.0);
    }
    let reports = all
        .iter()
        .map(|&f| evaluate_paired(&sc.with_demand_scale(f), Control::Fixed, candidate, seeds, exec))
        .collect::<Result<Vec<_>>>()?;
    let reference = &reports[all.iter().position(|&f| f == 1.0).unwrap_or(0)];
    let rel = |a: &KpiSummary, r: &KpiSummary| {
        a.zip_with(r, |v, r| if r == 0.0 { 0.0 } else { v / r - 1.0 })
    };
    let (ref_cand, ref_base) = (reference.candidate_mean, reference.baseline_mean);
    Ok(all
        .into_iter()
        .zip(reports)
        .map(|(factor, report)| SweepRow {
            factor,
            relative: rel(&report.candidate_mean, &ref_cand),
            baseline_relative: rel(&report.baseline_mean, &ref_base),
            report,
        })
        .collect())
}
