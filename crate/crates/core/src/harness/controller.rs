use serde::{Deserialize, Serialize};

use crate::decision_rule::{
    default_saturation, forward, normalize_state, DecisionRuleParams, OutputBounds, SensorWindow,
    StateMatrix,
};
use crate::feasibility::split_by_junction;
use crate::microsim::{ControlDecision, ControlRequest, SignalController};
use crate::network::{Scenario, SignalPlan};
use crate::{Error, Result};

/// One projected decision for one junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub time: f64,
    pub junction: usize,
    pub proposal: Vec<f64>,
    pub greens: Vec<f64>,
    pub lambda: f64,
}

/// Neural decision rule followed by the feasibility projection, applied to
/// every controlled junction at each decision epoch.
pub struct NdrController<'a> {
    params: &'a DecisionRuleParams,
    window: SensorWindow,
    saturation: Vec<f64>,
    junctions: Vec<usize>,
    plans: Vec<&'a SignalPlan>,
    bounds: OutputBounds,
    pub log: Vec<DecisionLogEntry>,
}

impl<'a> NdrController<'a> {
    pub fn new(sc: &'a Scenario, params: &'a DecisionRuleParams, window: SensorWindow) -> Result<Self> {
        let net = &sc.network;
        params.check()?;
        if !window.is_valid() {
            return Err(Error::InvalidArgument("sensor window needs depth >= 1 and period > 0".into()));
        }
        if let Some(d) = net.detectors.first() {
            if (d.period - window.period).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "window period {} differs from detector period {}",
                    window.period, d.period
                )));
            }
        }
        let dims = [
            ("decision rule sensor rows", net.detectors.len(), params.n_sensors),
            ("decision rule time columns", window.columns(), params.n_cols),
            ("decision rule outputs", net.total_phase_count(&sc.scope), params.n_outputs),
        ];
        for (context, expected, actual) in dims {
            if expected != actual {
                return Err(Error::Dimension { context, expected, actual });
            }
        }
        let junctions = net.controlled_indices(&sc.scope);
        let plans: Vec<&SignalPlan> = junctions.iter().map(|&j| &net.junctions[j]).collect();
        let bounds = OutputBounds {
            lower: plans.iter().flat_map(|p| p.phases.iter().map(|ph| ph.g_min)).collect(),
            upper: plans.iter().flat_map(|p| p.phases.iter().map(|ph| ph.g_max)).collect(),
        };
        Ok(Self {
            params,
            saturation: default_saturation(net, window.period),
            window,
            junctions,
            plans,
            bounds,
            log: Vec::new(),
        })
    }

    /// Raw proposal for a given normalized state.
    pub fn propose(&self, q: &StateMatrix) -> Result<Vec<f64>> {
        forward(self.params, q, &self.bounds)
    }
}

impl SignalController for NdrController<'_> {
    fn decide(&mut self, req: &ControlRequest<'_>) -> Result<ControlDecision> {
        let raw = StateMatrix::from_detector_log(req.detectors, &self.window, req.time);
        let q = normalize_state(&raw, &self.saturation);
        let proposal = self.propose(&q)?;
        let projected = split_by_junction(&proposal, &self.plans)?;
        let mut decision = Vec::with_capacity(projected.len());
        let mut at = 0;
        for (&j, p) in self.junctions.iter().zip(projected) {
            let n = p.greens.len();
            log::debug!("t={} junction {j}: lambda {}", req.time, p.lambda);
            self.log.push(DecisionLogEntry {
                time: req.time,
                junction: j,
                proposal: proposal[at..at + n].to_vec(),
                greens: p.greens.clone(),
                lambda: p.lambda,
            });
            decision.push((j, p.greens));
            at += n;
        }
        Ok(decision)
    }
}
