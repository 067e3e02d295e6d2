//! Exact, desk-scale control-as-inference on tabular finite-horizon MDPs.
//!
//! The crate computes soft Q/V values parametrised by a policy, the
//! incoherence of a policy with respect to an order-respecting selector, and
//! three retraining dynamics that remove it: repeated goal conditioning,
//! inverse-temperature scaling, and folding the posterior back into the
//! reward. Every identity relating them is paired with a brute-force
//! trajectory-enumeration oracle.
//!
//! Probabilities live in the linear domain inside policies and dynamics;
//! rewards, Q and V live in the log domain with `f64::NEG_INFINITY` standing
//! for probability zero.

pub mod builtins;
pub mod coherence;
mod error;
pub mod harness;
pub mod loader;
pub mod logspace;
pub mod mdp;
pub mod policy;
pub mod random;
pub mod report;
pub mod retraining;
pub mod soft;
pub mod stability;
pub mod trajectory;

pub use error::{Error, Result};
pub use logspace::ExtLogProb;
pub use mdp::{validate_mdp, Mdp, MdpParts, Rewards, Violation};
pub use policy::{Occupancy, Policy};
pub use report::{Check, Report};
pub use soft::SoftValues;
pub use trajectory::{Trajectory, DEFAULT_ENUMERATION_CAP};

/// Tolerance on row sums of stochastic matrices and policies.
pub const ROW_SUM_TOL: f64 = 1e-12;
