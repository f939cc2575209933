//! Goal-oriented sensor scheduling for remote monitoring of a nonlinear
//! dynamic system.
//!
//! An edge node polls at most one of `N` sensors per time step, tracks the
//! hidden state with a cubature quadrature Kalman filter whose dynamics are
//! learned online by Holt's double exponential smoothing, and answers client
//! queries about the state. Three polling policies are provided:
//!
//! * [`schedulers::DqnScheduler`] in its proposed configuration, observing
//!   only the prior covariance trace and the time since each client's last
//!   query, with a "poll nobody" action;
//! * the same agent in its benchmark configuration, observing the full
//!   filter state and polling on every step;
//! * [`schedulers::MonteCarloScheduler`], a one-step lookahead that samples
//!   hypothetical measurements.
//!
//! [`harness`] wires everything into a reproducible experiment loop and
//! [`complexity`] evaluates the per-decision operation counts of each policy.

pub mod complexity;
pub mod cqpoints;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod neural;
pub mod numerics;
pub mod queries;
pub mod schedulers;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream, StreamId, Vector};
