//! Optimal solutions: full separation, fixed separation, maximum separation
//! under a budget, and the tradeoff between them.

pub mod curve;
pub mod maxsep;
pub mod phase;
pub mod tradeoff;
pub mod ud;

pub use curve::{
    curve_point, lower_half_point, qmin_at, qmin_curve, qmin_sample, CurveParam, QminSample,
};
pub use maxsep::{
    critical_overlap, max_clones, max_separation, separation_from_angle, CloneLimit, MaxSeparation,
};
pub use phase::{analytic_ud_jump, phase_transition_probe};
pub use tradeoff::{tradeoff_at, tradeoff_curve, tradeoff_from_angle, TradeoffSample};
pub use ud::{lower_critical_prior, q_ud, q_ud_point, upper_critical_prior};
