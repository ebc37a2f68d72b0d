use std::path::PathBuf;

use crate::network::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scenario failed validation:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("infeasible green-time set: sum of minimum greens {min_total} and maximum greens {max_total} do not bracket budget {budget}")]
    InfeasibleSet {
        min_total: f64,
        max_total: f64,
        budget: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("controller returned infeasible green times for junction {junction}: {reason}")]
    InfeasibleControl { junction: String, reason: String },

    #[error("unknown vehicle class {0:?}")]
    UnknownClass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation with seed {seed} failed: {source}")]
    Simulation {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed parameter file: {0}")]
    ParamFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  - {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}
