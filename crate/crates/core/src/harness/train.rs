use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::evaluate::{run_kpis, Control};
use super::kpi::KpiSummary;
use super::objective::{ObjectiveMode, ObjectiveSpec};
use crate::decision_rule::{Architecture, DecisionRuleParams, SensorWindow};
use crate::exec::ExecMode;
use crate::network::{load_scenario, read_detector_layout, ControlScope, Scenario};
use crate::pso::{pso_minimize, pso_resume, InertiaSchedule, PsoConfig, PsoResult, PsoState, ProgressSink};
use crate::{Error, Result};

/// PSO settings for weight training. The search box is `[−search_box, search_box]`
/// per weight and initial positions are drawn from `[−init_range, init_range]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSettings {
    pub population: usize,
    pub max_iterations: usize,
    pub no_improvement_window: usize,
    pub seed: u64,
    pub search_box: f64,
    pub init_range: f64,
    pub inertia: InertiaSchedule,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_cap: f64,
}

impl Default for PsoSettings {
    fn default() -> Self {
        Self {
            population: 5,
            max_iterations: 45,
            no_improvement_window: 45,
            seed: 1,
            search_box: 5.0,
            init_range: 1.0,
            inertia: InertiaSchedule::Linear { start: 0.9, end: 0.4 },
            cognitive: 2.0,
            social: 2.0,
            velocity_cap: 0.5,
        }
    }
}

impl PsoSettings {
    pub fn config(&self, dim: usize, exec: ExecMode) -> PsoConfig {
        let mut cfg = PsoConfig::uniform_box(
            dim,
            -self.search_box,
            self.search_box,
            self.population,
            self.max_iterations,
            self.seed,
        );
        cfg.no_improvement_window = self.no_improvement_window;
        cfg.inertia = self.inertia.clone();
        cfg.cognitive = self.cognitive;
        cfg.social = self.social;
        cfg.velocity_cap = self.velocity_cap;
        cfg.init_range = Some((-self.init_range, self.init_range));
        cfg.exec = exec;
        cfg
    }
}

/// Objective weights and optional fixed normalizers; missing normalizers
/// come from baseline means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSettings {
    #[serde(default)]
    pub mode: Option<ObjectiveMode>,
    #[serde(default = "one")]
    pub w1: f64,
    #[serde(default = "one")]
    pub w2: f64,
    #[serde(default = "one")]
    pub w3: f64,
    pub n1: Option<f64>,
    pub n2: Option<f64>,
    pub n3: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ObjectiveSettings {
    fn default() -> Self {
        Self {
            mode: None,
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
            n1: None,
            n2: None,
            n3: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScopeEntry {
    junctions: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingFile {
    scenario: PathBuf,
    #[serde(default)]
    control: Option<ScopeEntry>,
    #[serde(default)]
    detector_layout: Option<PathBuf>,
    architecture: Architecture,
    #[serde(default)]
    window: SensorWindow,
    #[serde(default)]
    pso: PsoSettings,
    training_seeds: Vec<u64>,
    #[serde(default)]
    eval_seeds: Vec<u64>,
    #[serde(default)]
    objective: ObjectiveSettings,
    #[serde(default)]
    exec: ExecMode,
}

/// Everything needed to train and evaluate one decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSpec {
    pub scenario: Scenario,
    pub architecture: Architecture,
    pub window: SensorWindow,
    pub pso: PsoSettings,
    /// K = `training_seeds.len()`.
    pub training_seeds: Vec<u64>,
    pub eval_seeds: Vec<u64>,
    pub objective: ObjectiveSettings,
    pub exec: ExecMode,
}

impl TrainingSpec {
    pub fn new(scenario: Scenario, architecture: Architecture, training_seeds: Vec<u64>) -> Self {
        Self {
            scenario,
            architecture,
            window: SensorWindow::default(),
            pso: PsoSettings::default(),
            training_seeds,
            eval_seeds: Vec::new(),
            objective: ObjectiveSettings::default(),
            exec: ExecMode::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.training_seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one training seed is required".into()));
        }
        if let Some(s) = self.eval_seeds.iter().find(|s| self.training_seeds.contains(s)) {
            return Err(Error::InvalidArgument(format!(
                "seed {s} is used for both training and evaluation"
            )));
        }
        if !self.window.is_valid() {
            return Err(Error::InvalidArgument("sensor window needs lag < depth and period > 0".into()));
        }
        if self.scenario.network.total_phase_count(&self.scenario.scope) == 0 {
            return Err(Error::InvalidArgument("control scope contains no phases".into()));
        }
        Ok(())
    }

    /// Zero weights shaped for this scenario, scope, window and architecture.
    pub fn template(&self) -> DecisionRuleParams {
        let net = &self.scenario.network;
        DecisionRuleParams::zeros(
            self.architecture.clone(),
            net.detectors.len(),
            self.window.columns(),
            net.total_phase_count(&self.scenario.scope),
        )
    }

    pub fn with_scenario(&self, scenario: Scenario) -> Self {
        Self {
            scenario,
            ..self.clone()
        }
    }

    /// Resolve the objective: explicit weights and normalizers from the spec,
    /// missing normalizers from fixed-timing means on the training seeds.
    pub fn objective_for(&self, mode: Option<ObjectiveMode>) -> Result<ObjectiveSpec> {
        let o = &self.objective;
        let mode = mode.or(o.mode).unwrap_or(ObjectiveMode::DelayOnly);
        let mut spec = ObjectiveSpec::new(mode);
        spec.w1 = o.w1;
        spec.w2 = o.w2;
        spec.w3 = o.w3;
        if o.n1.is_none() || o.n2.is_none() || o.n3.is_none() {
            let base = KpiSummary::mean(&run_kpis(
                &self.scenario,
                Control::Fixed,
                &self.training_seeds,
                self.exec,
            )?);
            spec = spec.with_normalizers(base.mean_delay, base.co2, base.bc);
        }
        spec.n1 = o.n1.unwrap_or(spec.n1);
        spec.n2 = o.n2.unwrap_or(spec.n2);
        spec.n3 = o.n3.unwrap_or(spec.n3);
        spec.check()?;
        Ok(spec)
    }
}

/// Read a training spec. The scenario and detector layout paths are relative
/// to the spec file.
pub fn load_training_spec(path: impl AsRef<Path>) -> Result<TrainingSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: TrainingFile = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut scenario = load_scenario(base.join(&file.scenario))?;
    if let Some(scope) = file.control {
        scenario = scenario.with_scope(ControlScope {
            controlled_junctions: scope.junctions,
        });
    }
    if let Some(layout) = &file.detector_layout {
        scenario = scenario.with_detectors(read_detector_layout(base.join(layout))?);
    }
    let diags = crate::network::validate_scenario(&scenario);
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    let spec = TrainingSpec {
        scenario,
        architecture: file.architecture,
        window: file.window,
        pso: file.pso,
        training_seeds: file.training_seeds,
        eval_seeds: file.eval_seeds,
        objective: file.objective,
        exec: file.exec,
    };
    spec.check()?;
    Ok(spec)
}

/// Mean scalar objective over the training seeds with the decision rule in control.
pub fn evaluate_objective(params: &DecisionRuleParams, spec: &TrainingSpec, objective: &ObjectiveSpec) -> Result<f64> {
    let control = Control::Ndr {
        params,
        window: spec.window,
    };
    let kpis = run_kpis(&spec.scenario, control, &spec.training_seeds, spec.exec)?;
    Ok(kpis.iter().map(|k| objective.scalar(k)).sum::<f64>() / kpis.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainingResult {
    pub params: DecisionRuleParams,
    pub objective: ObjectiveSpec,
    pub pso: PsoResult,
}

/// Train from scratch, or continue from `resume` if given.
pub fn train<S>(spec: &TrainingSpec, objective: &ObjectiveSpec, resume: Option<PsoState>, sink: &mut S) -> Result<TrainingResult>
where
    S: ProgressSink + ?Sized,
{
    spec.check()?;
    objective.check()?;
    let template = spec.template();
    let cfg = spec.pso.config(template.expected_len(), spec.exec);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let f = |w: &[f64]| -> f64 {
        let run = template
            .with_weights(w.to_vec())
            .and_then(|p| evaluate_objective(&p, spec, objective));
        match run {
            Ok(v) => v,
            Err(e) => {
                log::warn!("objective evaluation failed: {e}");
                first_error.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let pso = match resume {
        Some(state) => {
            if state.global_best.len() != cfg.dim() {
                return Err(Error::Dimension {
                    context: "checkpoint weight vector",
                    expected: cfg.dim(),
                    actual: state.global_best.len(),
                });
            }
            pso_resume(&f, &cfg, state, sink)?
        }
        None => pso_minimize(&f, &cfg, sink)?,
    };
    if !pso.best_value.is_finite() {
        return Err(first_error
            .into_inner()
            .unwrap()
            .unwrap_or_else(|| Error::InvalidArgument("no finite objective value".into())));
    }
    Ok(TrainingResult {
        params: template.with_weights(pso.best.clone())?,
        objective: *objective,
        pso,
    })
}
