//! The end-to-end estimator: split, draw directions, fit, reduce to the max
//! sequence, transform to the signal curve, threshold.
//!
//! Everything is seeded from a single master seed through fixed substream
//! derivation, so a run is byte-reproducible regardless of thread count.

use serde::Serialize;

use crate::ccf::backend::{BackendSpec, RegressionBackend};
use crate::ccf::{draw_directions, split_sample, Direction, SplitAssignment};
use crate::error::{Error, Result};
use crate::gamma::{compute_pi_sequence, GammaCell, PiSequence};
use crate::rng::derive_seed;
use crate::signal::{estimate_order, signal_curve, OrderEstimate, RidgeSchedule};
use crate::trajectory::Dataset;

const FIT_STREAM: u64 = 0xf17;

/// Estimator configuration. Defaults follow the recommended settings:
/// `K = 6`, `Q = 5`, `B = floor((NT)^(1/4))`, `eta = 3`, `tau = 0.5`,
/// ridge `0.1 * ln(n)^(3/2) / sqrt(n)`, forest backend.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Largest candidate order K.
    pub k_max: usize,
    /// Largest lag offset Q.
    pub q_max: usize,
    /// Number of direction pairs B; `None` selects `floor((NT)^(1/4))`.
    pub num_directions: Option<usize>,
    pub eta: f64,
    pub tau: f64,
    pub ridge: RidgeSchedule,
    pub backend: BackendSpec,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            k_max: 6,
            q_max: 5,
            num_directions: None,
            eta: 3.0,
            tau: 0.5,
            ridge: RidgeSchedule::default(),
            backend: BackendSpec::default(),
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    /// Validate against the dimensions of the data it will run on.
    pub fn validate_dims(&self, n: usize, t_len: usize) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::validation("K must be >= 1".to_string()));
        }
        if self.q_max + self.k_max + 2 > t_len {
            return Err(Error::validation(format!(
                "Q + K must be at most T - 2 (got Q={}, K={}, T={t_len})",
                self.q_max, self.k_max
            )));
        }
        if self.num_directions == Some(0) {
            return Err(Error::validation("B must be >= 1".to_string()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::validation(format!(
                "tau must lie strictly between 0 and 1, got {}",
                self.tau
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 1.0) {
            return Err(Error::validation(format!(
                "eta must be >= 1, got {}",
                self.eta
            )));
        }
        self.ridge.validate()?;
        if n < 2 {
            return Err(Error::validation(format!("N must be >= 2, got {n}")));
        }
        Ok(())
    }

    /// The direction count to use for a dataset of `n` trajectories of
    /// length `t_len`.
    pub fn directions_for(&self, n: usize, t_len: usize) -> usize {
        self.num_directions
            .unwrap_or_else(|| ((n * t_len) as f64).powf(0.25).floor() as usize)
            .max(1)
    }
}

/// Everything produced by one estimator run.
#[derive(Debug, Clone)]
pub struct EstimateRun {
    pub order: OrderEstimate,
    pub pi: PiSequence,
    pub cells: Vec<GammaCell>,
    pub split: SplitAssignment,
    pub directions: Vec<Direction>,
}

/// JSON-facing view of a run:
/// `{"k_hat": int|null, "undetermined": bool, "tau": f, "eta": f,
///   "ridge": f, "pi": [f...], "omega": [f...]}`
/// (`pi` includes the pinned leading 1 for `k = 0`).
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub k_hat: Option<usize>,
    pub undetermined: bool,
    pub tau: f64,
    pub eta: f64,
    pub ridge: f64,
    pub pi: Vec<f64>,
    pub omega: Vec<f64>,
}

impl EstimateRun {
    pub fn report(&self) -> EstimateReport {
        EstimateReport {
            k_hat: self.order.k_hat,
            undetermined: self.order.undetermined,
            tau: self.order.tau,
            eta: self.order.curve.eta(),
            ridge: self.order.curve.ridge_used(),
            pi: self.pi.values().to_vec(),
            omega: self.order.curve.omega().to_vec(),
        }
    }
}

/// Run the estimator with the configured backend.
pub fn run_estimate(dataset: &Dataset, config: &EstimatorConfig) -> Result<EstimateRun> {
    let backend = config.backend.build()?;
    run_estimate_with(dataset, config, backend.as_ref())
}

/// Run the estimator with an explicit backend instance (used to plug in the
/// exact oracle during verification).
pub fn run_estimate_with(
    dataset: &Dataset,
    config: &EstimatorConfig,
    backend: &dyn RegressionBackend,
) -> Result<EstimateRun> {
    config
        .validate_dims(dataset.num_trajectories(), dataset.t_len())
        .map_err(|e| e.in_stage("validate"))?;

    let split = split_sample(dataset, config.seed).map_err(|e| e.in_stage("split"))?;
    let b = config.directions_for(dataset.num_trajectories(), dataset.t_len());
    let directions =
        draw_directions(b, dataset.state_dim(), config.seed).map_err(|e| e.in_stage("directions"))?;

    let grid = compute_pi_sequence(
        dataset,
        &split,
        &directions,
        config.k_max,
        config.q_max,
        backend,
        derive_seed(config.seed, &[FIT_STREAM]),
    )
    .map_err(|e| e.in_stage("deviation-grid"))?;

    let curve = signal_curve(
        &grid.pi,
        &config.ridge,
        config.eta,
        split.n_eval(),
        dataset.t_len(),
    )
    .map_err(|e| e.in_stage("signal-curve"))?;
    let order = estimate_order(&curve, config.tau).map_err(|e| e.in_stage("estimate"))?;

    Ok(EstimateRun {
        order,
        pi: grid.pi,
        cells: grid.cells,
        split,
        directions,
    })
}
