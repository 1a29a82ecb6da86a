//! Data-enabled predictive control of inter-regional transfers.
//!
//! Historical input, disturbance and output trajectories are arranged in
//! Hankel matrices; the controller then solves a regularised quadratic
//! program over the Hankel column weights `g` at every upper-layer step and
//! applies the first input of the optimal trajectory.

mod controller;
mod data;
mod hankel;
mod noise;
mod oracle;
mod problem;

pub use controller::{DeepcController, DeepcModel, Plan, SolveRecord, RELAXED_RESIDUAL};
pub use data::{assemble_hankel_set, CollectedData, HankelSet};
pub use hankel::{build_hankel, is_persistently_exciting, numerical_rank, SignalSeries};
pub use noise::{noise_variance_for_snr, od_marginals, perturb_forecast, perturb_od, snr_of};
pub use oracle::{fundamental_lemma_residual, LtiOracle};
pub use problem::{
    command_from_plan, deepc_rhs, extract_command, flatten_transfer_weights, formulate_deepc_qp,
    ControlCommand, DeepcParams, DeepcRhs, DeepcStructure, DEFAULT_ALPHA, DEFAULT_HORIZON,
    DEFAULT_LAMBDA_G, DEFAULT_LAMBDA_Y, DEFAULT_T_INI,
};
