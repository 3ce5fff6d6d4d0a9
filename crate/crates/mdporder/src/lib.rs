//! Order determination for Markov decision processes from offline
//! trajectories.
//!
//! Given `N` i.i.d. trajectories of (state, action) pairs, the estimator
//! decides how many past state-action pairs the next state actually depends
//! on. The route:
//!
//! 1. Split trajectories into an evaluation half and a training half
//!    ([`ccf::split_sample`]).
//! 2. For every candidate order `k`, lag offset `q`, and random projection
//!    direction, fit the six conditional-characteristic-function components
//!    on the training half ([`ccf`]) and average the squared factorization
//!    defect on the evaluation half ([`gamma`]).
//! 3. Reduce the grid to a per-order max sequence, transform it into the
//!    ridge-ratio signal curve, and report the largest order whose signal
//!    value clears the threshold ([`signal`]).
//!
//! [`pipeline::run_estimate`] wires the stages together; [`mc::run_mc`]
//! repeats simulate-estimate cycles for Monte Carlo studies on the bundled
//! generators ([`simulate`]). [`enumchain`] provides an exactly solvable
//! chain used to validate the statistic against brute-force enumeration.
//!
//! Trajectories are assumed i.i.d. with a common length, the underlying
//! process stationary and geometrically ergodic, and the regression backend
//! consistent for the conditional expectations it estimates; none of this is
//! checkable from a single dataset and none of it is enforced at runtime.

pub mod ccf;
pub mod enumchain;
pub mod error;
pub mod gamma;
pub mod io;
pub mod mc;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod simulate;
pub mod trajectory;

pub use ccf::backend::BackendSpec;
pub use error::{Error, Result};
pub use io::Format;
pub use pipeline::{run_estimate, EstimateRun, EstimatorConfig};
pub use signal::{OrderEstimate, RidgeSchedule, SignalCurve};
pub use simulate::{simulate, Model, SimSpec};
pub use trajectory::{Dataset, Trajectory};
