//! Optimal probabilistic separation of two pure quantum states.
//!
//! Given two states with overlap `s` and prior probabilities `(eta1, eta2)`,
//! a separation protocol outputs states with a smaller overlap `s'` and fails
//! with average probability `Q`. The crate computes
//!
//! - the minimum `Q` at fixed `(s, s')` ([`solvers::qmin_at`], [`solvers::qmin_curve`]),
//! - the smallest `s'` under a failure budget ([`solvers::max_separation`]),
//! - the `(Q, s')` tradeoff at fixed `s` ([`solvers::tradeoff_curve`]),
//!
//! and checks them against a brute-force minimizer ([`oracle`]) and a
//! simulated three-port interferometer ([`optics`]).

pub mod conics;
pub mod error;
pub mod model;
pub mod optics;
pub mod oracle;
pub mod roots;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use model::{FailureBudget, FailurePoint, OverlapSpec, Priors};
