use serde::{Deserialize, Serialize};

use super::StateMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// Fully connected network over the flattened window, one entry per hidden layer.
    Ffnn { hidden: Vec<usize> },
    /// Single recurrent hidden layer reading one window column per step.
    Rnn { hidden: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ffnn { .. } => "ffnn",
            Self::Rnn { .. } => "rnn",
        }
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        match self {
            Self::Ffnn { hidden } => hidden.clone(),
            Self::Rnn { hidden } => vec![*hidden],
        }
    }
}

/// Number of weights and biases.
///
/// Flat layout, FFNN: for each layer in order (hidden layers then output),
/// the weight matrix row-major by receiving neuron, then its biases. The
/// input layer is the state flattened by time (all sensors of the oldest
/// column first).
///
/// Flat layout, RNN: input weights (hidden × sensors), hidden biases,
/// recurrent weights (hidden × hidden, row = receiving neuron), output
/// weights (outputs × hidden), output biases.
pub fn param_count(arch: &Architecture, n_sensors: usize, n_cols: usize, n_outputs: usize) -> usize {
    match arch {
        Architecture::Ffnn { hidden } => {
            let mut fan_in = n_sensors * n_cols;
            let mut total = 0;
            for &h in hidden.iter().chain(std::iter::once(&n_outputs)) {
                total += fan_in * h + h;
                fan_in = h;
            }
            total
        }
        Architecture::Rnn { hidden } => {
            let h = *hidden;
            n_sensors * h + h + h * h + h * n_outputs + n_outputs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRuleParams {
    pub arch: Architecture,
    pub n_sensors: usize,
    pub n_cols: usize,
    pub n_outputs: usize,
    pub weights: Vec<f64>,
}

impl DecisionRuleParams {
    pub fn zeros(arch: Architecture, n_sensors: usize, n_cols: usize, n_outputs: usize) -> Self {
        let n = param_count(&arch, n_sensors, n_cols, n_outputs);
        Self {
            arch,
            n_sensors,
            n_cols,
            n_outputs,
            weights: vec![0.0; n],
        }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let p = Self {
            weights,
            ..self.clone()
        };
        p.check()?;
        Ok(p)
    }

    pub fn expected_len(&self) -> usize {
        param_count(&self.arch, self.n_sensors, self.n_cols, self.n_outputs)
    }

    pub fn check(&self) -> Result<()> {
        let expected = self.expected_len();
        if self.weights.len() != expected {
            return Err(Error::Dimension {
                context: "decision rule weights",
                expected,
                actual: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite decision rule weight".into()));
        }
        Ok(())
    }
}

/// Per-output [lower, upper] range the sigmoid output is mapped onto.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// y = σ(W·x + b) for a row-major W taken from the front of `w`; returns the
/// unread remainder of `w`.
fn dense<'w>(w: &'w [f64], x: &[f64], out: usize, extra: Option<(&'w [f64], &[f64])>, y: &mut Vec<f64>) -> &'w [f64] {
    let fan_in = x.len();
    let (mat, rest) = w.split_at(fan_in * out);
    let (bias, rest) = rest.split_at(out);
    y.clear();
    for j in 0..out {
        let row = &mat[j * fan_in..(j + 1) * fan_in];
        let mut z = bias[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        if let Some((rec, prev)) = extra {
            let h = prev.len();
            z += rec[j * h..(j + 1) * h]
                .iter()
                .zip(prev)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        y.push(sigmoid(z));
    }
    rest
}

fn scale_outputs(act: &[f64], bounds: &OutputBounds) -> Vec<f64> {
    act.iter()
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|(s, (lo, hi))| lo + s * (hi - lo))
        .collect()
}

fn check_inputs(params: &DecisionRuleParams, q: &StateMatrix, bounds: &OutputBounds) -> Result<()> {
    params.check()?;
    if q.rows != params.n_sensors {
        return Err(Error::Dimension {
            context: "state rows (sensors)",
            expected: params.n_sensors,
            actual: q.rows,
        });
    }
    if q.cols != params.n_cols {
        return Err(Error::Dimension {
            context: "state columns (time steps)",
            expected: params.n_cols,
            actual: q.cols,
        });
    }
    if bounds.lower.len() != params.n_outputs || bounds.upper.len() != params.n_outputs {
        return Err(Error::Dimension {
            context: "output bounds",
            expected: params.n_outputs,
            actual: bounds.lower.len().min(bounds.upper.len()),
        });
    }
    Ok(())
}

pub fn ffnn_forward(params: &DecisionRuleParams, q: &StateMatrix, bounds: &OutputBounds) -> Result<Vec<f64>> {
    let Architecture::Ffnn { hidden } = &params.arch else {
        return Err(Error::InvalidArgument("ffnn_forward needs FFNN parameters".into()));
    };
    check_inputs(params, q, bounds)?;
    let mut x = q.flatten_by_time();
    let mut y = Vec::new();
    let mut w: &[f64] = &params.weights;
    for &h in hidden.iter().chain(std::iter::once(&params.n_outputs)) {
        w = dense(w, &x, h, None, &mut y);
        std::mem::swap(&mut x, &mut y);
    }
    Ok(scale_outputs(&x, bounds))
}

pub fn rnn_forward(params: &DecisionRuleParams, q: &StateMatrix, bounds: &OutputBounds) -> Result<Vec<f64>> {
    let Architecture::Rnn { hidden } = params.arch else {
        return Err(Error::InvalidArgument("rnn_forward needs RNN parameters".into()));
    };
    check_inputs(params, q, bounds)?;
    let n = params.n_sensors;
    let h = hidden;
    let w = &params.weights;
    let input_block = &w[..n * h + h];
    let recurrent = &w[n * h + h..n * h + h + h * h];
    let output_block = &w[n * h + h + h * h..];

    let mut state: Option<Vec<f64>> = None;
    let mut next = Vec::with_capacity(h);
    for c in 0..q.cols {
        let f = q.column(c);
        match &state {
            None => {
                dense(input_block, &f, h, None, &mut next);
            }
            Some(prev) => {
                dense(input_block, &f, h, Some((recurrent, prev)), &mut next);
            }
        }
        state = Some(std::mem::take(&mut next));
    }
    let last = state.unwrap_or_else(|| vec![0.5; h]);
    let mut out = Vec::new();
    dense(output_block, &last, params.n_outputs, None, &mut out);
    Ok(scale_outputs(&out, bounds))
}

/// Dispatch on the parameter architecture.
pub fn forward(params: &DecisionRuleParams, q: &StateMatrix, bounds: &OutputBounds) -> Result<Vec<f64>> {
    match params.arch {
        Architecture::Ffnn { .. } => ffnn_forward(params, q, bounds),
        Architecture::Rnn { .. } => rnn_forward(params, q, bounds),
    }
}
