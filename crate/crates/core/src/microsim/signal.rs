use serde::Serialize;

use crate::network::SignalPlan;

/// Runtime signal state for one junction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalState {
    pub greens: Vec<f64>,
    /// Timings queued by the controller, applied at the next cycle start.
    pub pending: Option<Vec<f64>>,
    cycle_index: Option<i64>,
}

impl SignalState {
    pub fn new(plan: &SignalPlan) -> Self {
        Self {
            greens: plan.default_greens(),
            pending: None,
            cycle_index: None,
        }
    }

    /// Advance to time `t`; swaps in pending timings when a new cycle begins.
    /// Returns true if a pending timing was applied.
    pub fn update(&mut self, plan: &SignalPlan, t: f64) -> bool {
        let k = ((t - plan.offset) / plan.cycle_time).floor() as i64;
        let new_cycle = self.cycle_index != Some(k) && t >= plan.offset;
        self.cycle_index = Some(k);
        if new_cycle {
            if let Some(g) = self.pending.take() {
                self.greens = g;
                return true;
            }
        }
        false
    }

    /// Seconds into the current cycle.
    pub fn elapsed(plan: &SignalPlan, t: f64) -> f64 {
        (t - plan.offset).rem_euclid(plan.cycle_time)
    }

    /// Phase showing green at time `t`, or `None` during inter-green.
    ///
    /// Phases run in plan order, each followed by an equal share of the lost time.
    pub fn active_phase(&self, plan: &SignalPlan, t: f64) -> Option<usize> {
        let elapsed = Self::elapsed(plan, t);
        let intergreen = plan.lost_time / self.greens.len() as f64;
        let mut start = 0.0;
        for (i, g) in self.greens.iter().enumerate() {
            if elapsed >= start && elapsed < start + g {
                return Some(i);
            }
            start += g + intergreen;
        }
        None
    }
}
