//! Minimum-norm projection of proposed green times onto
//! `{ g : lower ≤ g ≤ upper, Σ g = budget }`.
//!
//! The KKT solution is `g_i = clamp(ĝ_i − λ, lower_i, upper_i)` where λ
//! solves `φ(λ) = Σ clamp(ĝ_i − λ, lower_i, upper_i) − budget = 0`. φ is
//! continuous, non-increasing and piecewise linear with breakpoints at
//! `ĝ_i − upper_i` and `ĝ_i − lower_i`, so the root is found exactly by
//! scanning the sorted breakpoints and interpolating on the bracketing segment.

use serde::{Deserialize, Serialize};

use crate::network::{SignalPlan, BUDGET_TOL};
use crate::{Error, Result};

/// Residual tolerance on the budget constraint after projection.
pub const DUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cycle time minus lost time.
    pub budget: f64,
}

impl FeasibleSet {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Dimension {
                context: "feasible set bounds",
                expected: self.lower.len(),
                actual: self.upper.len(),
            });
        }
        let min_total: f64 = self.lower.iter().sum();
        let max_total: f64 = self.upper.iter().sum();
        let bounds_ok = self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u);
        if !bounds_ok
            || min_total > self.budget + BUDGET_TOL
            || max_total < self.budget - BUDGET_TOL
        {
            return Err(Error::InfeasibleSet {
                min_total,
                max_total,
                budget: self.budget,
            });
        }
        Ok(())
    }

    pub fn contains(&self, g: &[f64], tol: f64) -> bool {
        g.len() == self.len()
            && g
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
            && (g.iter().sum::<f64>() - self.budget).abs() <= tol
    }

    /// φ(λ), the budget residual of the clamped shift.
    pub fn residual(&self, proposal: &[f64], lambda: f64) -> f64 {
        self.clamped(proposal, lambda).iter().sum::<f64>() - self.budget
    }

    fn clamped(&self, proposal: &[f64], lambda: f64) -> Vec<f64> {
        proposal
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(g, (l, u))| (g - lambda).clamp(*l, *u))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub greens: Vec<f64>,
    pub lambda: f64,
}

/// Root of φ. Where φ vanishes on a whole interval the smallest root is
/// returned (or the leftmost breakpoint if the interval is unbounded below).
pub fn solve_dual(proposal: &[f64], set: &FeasibleSet) -> Result<f64> {
    if proposal.len() != set.len() {
        return Err(Error::Dimension {
            context: "green-time proposal",
            expected: set.len(),
            actual: proposal.len(),
        });
    }
    set.check()?;
    if let Some(bad) = proposal.iter().find(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite green proposal {bad}")));
    }
    if proposal.is_empty() {
        return Ok(0.0);
    }

    let mut bps: Vec<f64> = proposal
        .iter()
        .zip(set.lower.iter().zip(&set.upper))
        .flat_map(|(g, (l, u))| [g - u, g - l])
        .collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();

    let phi: Vec<f64> = bps.iter().map(|&b| set.residual(proposal, b)).collect();
    let first = phi.iter().position(|&r| r <= 0.0).unwrap_or(bps.len() - 1);
    let lambda = if first == 0 || phi[first] == 0.0 {
        bps[first]
    } else {
        let (b0, b1) = (bps[first - 1], bps[first]);
        let (r0, r1) = (phi[first - 1], phi[first]);
        b0 + r0 * (b1 - b0) / (r0 - r1)
    };

    if set.residual(proposal, lambda).abs() <= DUAL_TOL {
        return Ok(lambda);
    }
    // Cancellation on very wide segments can leave a residual above
    // tolerance; refine inside the bracketing segment.
    let lo = if first == 0 { bps[0] } else { bps[first - 1] };
    Ok(bisect(proposal, set, lo, bps[first]))
}

fn bisect(proposal: &[f64], set: &FeasibleSet, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if set.residual(proposal, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if set.residual(proposal, lo).abs() < set.residual(proposal, hi).abs() {
        lo
    } else {
        hi
    }
}

pub fn project(proposal: &[f64], set: &FeasibleSet) -> Result<Projection> {
    let lambda = solve_dual(proposal, set)?;
    let mut greens = set.clamped(proposal, lambda);
    repair_sum(&mut greens, set);
    Ok(Projection { greens, lambda })
}

/// Spread any rounding residue over unclamped components so the budget
/// holds to the last few ulps.
fn repair_sum(g: &mut [f64], set: &FeasibleSet) {
    let residue = set.budget - g.iter().sum::<f64>();
    if residue == 0.0 {
        return;
    }
    for i in 0..g.len() {
        let moved = (g[i] + residue).clamp(set.lower[i], set.upper[i]);
        if moved != g[i] {
            g[i] = moved;
            return;
        }
    }
}

/// Project a flat proposal covering several junctions, one block per
/// junction in `plans` order.
pub fn split_by_junction(flat: &[f64], plans: &[&SignalPlan]) -> Result<Vec<Projection>> {
    let total: usize = plans.iter().map(|p| p.phases.len()).sum();
    if flat.len() != total {
        return Err(Error::Dimension {
            context: "flat green-time proposal",
            expected: total,
            actual: flat.len(),
        });
    }
    let mut out = Vec::with_capacity(plans.len());
    let mut at = 0;
    for plan in plans {
        let n = plan.phases.len();
        out.push(project(&flat[at..at + n], &plan.feasible_set())?);
        at += n;
    }
    Ok(out)
}
