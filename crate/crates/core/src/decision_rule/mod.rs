//! The decision rule: detector window → normalized state → neural network →
//! raw per-phase green proposals.

mod io;
mod nn;
mod state;

pub use io::{decode_params, encode_params, read_params, write_params, write_params_csv};
pub use nn::{
    ffnn_forward, forward, param_count, rnn_forward, sigmoid, Architecture, DecisionRuleParams,
    OutputBounds,
};
pub use state::{default_saturation, normalize_state, SensorWindow, StateMatrix};
