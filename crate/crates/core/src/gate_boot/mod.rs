//! Gate bootstrapping: blind rotation of a constant test polynomial over a
//! ring-GSW bootstrapping key, sample extraction and key switching.
//!
//! Every gate takes `{0, 1/4}`-encoded inputs, forms an integer linear
//! combination whose phase lands in `[0, 1/2)` exactly when the output bit is
//! 1 (with margin 1/8 to either boundary), and bootstraps it. Independent
//! bootstraps can be batched so that one pass over the keys serves them all.

pub mod fft;
mod gates;
mod key;
mod params;
mod simd;

pub use gates::{
    gate, gate_batch, gate_input, linear, majority_input, mux, mux_batch, noise_budget, refresh_half_input,
    refresh_input, xor3_input, GateOp,
};
pub use key::{make_evaluation_key, EvaluationKey};
pub use params::{BootstrapParams, GATE_ERROR_TARGET, MIN_FRESH_BUDGET};
