//! Off-line training and on-line evaluation.
//!
//! Training wraps Monte-Carlo simulation in a scalar objective and hands it
//! to the particle swarm; evaluation replays held-out seeds with the trained
//! rule and with fixed timing side by side. Independent runs are fanned out
//! through [`crate::exec`] and always reduced in seed order.

mod controller;
mod evaluate;
mod kpi;
mod objective;
mod relocation;
mod report;
mod train;

pub use controller::{DecisionLogEntry, NdrController};
pub use evaluate::{
    demand_sweep, evaluate_online, evaluate_paired, pearson, run_kpis, simulate, simulate_with_sink,
    Control, Correlation, EvaluationReport, RunResult, SweepRow,
};
pub use kpi::{kpi_delay, DelayStat, KpiRecord, KpiSummary};
pub use objective::{ObjectiveMode, ObjectiveSpec};
pub use relocation::{sensor_relocation_compare, RelocationReport};
pub use report::{
    write_detail_csv, write_evaluation_csv, write_evaluation_summary, write_kpi_csv,
    write_relocation_csv, write_sweep_csv,
};
pub use train::{
    evaluate_objective, load_training_spec, train, ObjectiveSettings, PsoSettings, TrainingResult,
    TrainingSpec,
};
