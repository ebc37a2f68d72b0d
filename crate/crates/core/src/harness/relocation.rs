use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_online, EvaluationReport};
use super::kpi::KpiSummary;
use super::objective::ObjectiveSpec;
use super::train::{train, TrainingSpec};
use crate::decision_rule::DecisionRuleParams;
use crate::network::{validate_scenario, DetectorConfig};
use crate::{Error, Result};

/// One decision rule per detector layout, each evaluated against fixed
/// timing on the same held-out seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelocationReport {
    pub a: EvaluationReport,
    pub b: EvaluationReport,
    /// Candidate means of B minus candidate means of A.
    pub delta: KpiSummary,
    pub params_a: DecisionRuleParams,
    pub params_b: DecisionRuleParams,
}

/// Train (unless `params` are supplied) and evaluate a decision rule for
/// each layout. The objective is reused for both layouts so the training
/// targets match.
pub fn sensor_relocation_compare(
    spec: &TrainingSpec,
    objective: &ObjectiveSpec,
    layout_a: &[DetectorConfig],
    layout_b: &[DetectorConfig],
    params: Option<(DecisionRuleParams, DecisionRuleParams)>,
) -> Result<RelocationReport> {
    if spec.eval_seeds.is_empty() {
        return Err(Error::InvalidArgument("relocation comparison needs evaluation seeds".into()));
    }
    let spec_for = |layout: &[DetectorConfig]| -> Result<TrainingSpec> {
        let sc = spec.scenario.with_detectors(layout.to_vec());
        let diags = validate_scenario(&sc);
        if !diags.is_empty() {
            return Err(Error::Invalid(diags));
        }
        Ok(spec.with_scenario(sc))
    };
    let (spec_a, spec_b) = (spec_for(layout_a)?, spec_for(layout_b)?);
    let (params_a, params_b) = match params {
        Some(p) => p,
        None => (
            train(&spec_a, objective, None, &mut ())?.params,
            train(&spec_b, objective, None, &mut ())?.params,
        ),
    };
    let eval = |s: &TrainingSpec, p: &DecisionRuleParams| {
        evaluate_online(&s.scenario, p, s.window, &s.eval_seeds, s.exec)
    };
    let a = eval(&spec_a, &params_a)?;
    let b = eval(&spec_b, &params_b)?;
    let delta = b.candidate_mean.zip_with(&a.candidate_mean, |b, a| b - a);
    Ok(RelocationReport {
        a,
        b,
        delta,
        params_a,
        params_b,
    })
}
