//! Security analysis of Wiesner quantum money sent through a lossy quantum
//! memory: optimal-cloning thresholds from a semidefinite program, a
//! Monte-Carlo model of the protocol, and the longest secure storage time.

pub mod adversary;
pub mod cli;
pub mod horizon;
pub mod linalg;
pub mod protocol;
pub mod sdp;
pub mod states;
pub mod threshold;

pub use horizon::{secure_storage_horizon, DecayModel, HorizonParams, HorizonResult};
pub use protocol::{keygen, run_protocol, verdict, ChannelParams, RunReport, SecretKey, Verdict, VerdictStatus};
pub use states::{money_state, poisson_split, MeanPhotonNumber, MoneyState, PoissonSplit};
pub use threshold::{compute_threshold, sweep, ThresholdQuery, ThresholdResult};
