//! Ridge-ratio signal curve and the order estimate.
//!
//! The max sequence converges to a limit that is positive strictly below the
//! true order and zero at or above it, so consecutive ratios drop at the
//! true order and sit at 1 beyond it. A vanishing ridge keeps the `0/0`
//! tail well-defined, and scaling the ridge by the eta-th power of the
//! largest max-statistic makes the curve invariant to the overall magnitude
//! of the sequence, which in small samples can be arbitrarily tiny.
//!
//! The estimate is the largest candidate order whose signal value sits at or
//! below the threshold `tau`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::PiSequence;

/// Ridge schedule `c_{N,T} = c0 * ln(n)^{a/2+1} * n^{-a/2}` with
/// `n = N_L * T`. With the defaults (`c0 = 0.1`, `a = 1`) the value decays
/// to zero while still dominating the sampling noise of the max sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeSchedule {
    pub c0: f64,
    pub a: f64,
}

impl Default for RidgeSchedule {
    fn default() -> Self {
        RidgeSchedule { c0: 0.1, a: 1.0 }
    }
}

impl RidgeSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::validation(format!(
                "ridge c0 must be positive, got {}",
                self.c0
            )));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::validation(format!(
                "ridge exponent a must be positive, got {}",
                self.a
            )));
        }
        Ok(())
    }

    /// Evaluate the schedule at `n_eval` evaluation trajectories of length
    /// `t_len`. Requires `n_eval * t_len >= 2`.
    pub fn value(&self, n_eval: usize, t_len: usize) -> Result<f64> {
        self.validate()?;
        let n = n_eval
            .checked_mul(t_len)
            .filter(|&n| n >= 2)
            .ok_or_else(|| {
                Error::validation(format!(
                    "ridge needs N_L * T >= 2, got {n_eval} * {t_len}"
                ))
            })? as f64;
        Ok(self.c0 * n.ln().powf(self.a / 2.0 + 1.0) * n.powf(-self.a / 2.0))
    }
}

/// The signal values for `k = 1..=K` plus the effective ridge used.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCurve {
    omega: Vec<f64>,
    ridge_used: f64,
    eta: f64,
    degenerate: bool,
}

impl SignalCurve {
    /// Construct directly from known signal values (mainly for feeding
    /// externally reported curves into [`estimate_order`]).
    pub fn from_values(omega: Vec<f64>, eta: f64, ridge_used: f64) -> Result<Self> {
        if omega.is_empty() || omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "signal values must be non-empty and finite".to_string(),
            ));
        }
        Ok(SignalCurve {
            omega,
            ridge_used,
            eta,
            degenerate: false,
        })
    }

    /// Signal values indexed by `k - 1` for `k = 1..=K`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// The effective (data-scaled) ridge actually added to both sides of
    /// each ratio.
    pub fn ridge_used(&self) -> f64 {
        self.ridge_used
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Set when every max-statistic was exactly zero, leaving no signal to
    /// rank orders by; the curve is pinned at 1 and no order is declared.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn k_max(&self) -> usize {
        self.omega.len()
    }
}

/// Transform the max sequence into the signal curve.
///
/// Let `m = max_k pi[k]`. If `m = 0` the curve is degenerate (all ones).
/// Otherwise the effective ridge is `c_{N,T} * m^eta` and
/// `omega[k] = (pi[k]^eta + ridge) / (pi[k-1]^eta + ridge)`; ratios beyond
/// the first are computed in the rescaled form `pi[k]/m` for numerical
/// stability, which is what makes the suffix of the curve exactly
/// scale-invariant.
pub fn signal_curve(
    pi: &PiSequence,
    schedule: &RidgeSchedule,
    eta: f64,
    n_eval: usize,
    t_len: usize,
) -> Result<SignalCurve> {
    if !(eta.is_finite() && eta >= 1.0) {
        return Err(Error::validation(format!("eta must be >= 1, got {eta}")));
    }
    let values = pi.values();
    debug_assert_eq!(values[0], 1.0);
    let k_max = pi.k_max();
    let c = schedule.value(n_eval, t_len)?;

    let m = values[1..].iter().copied().fold(0.0f64, f64::max);
    if m == 0.0 {
        return Ok(SignalCurve {
            omega: vec![1.0; k_max],
            ridge_used: 0.0,
            eta,
            degenerate: true,
        });
    }

    let ridge_used = c * m.powf(eta);
    let mut omega = Vec::with_capacity(k_max);
    // k = 1 keeps the raw form: the denominator is pinned at 1^eta.
    omega.push((values[1].powf(eta) + ridge_used) / (1.0 + ridge_used));
    for k in 2..=k_max {
        let r_num = (values[k] / m).powf(eta);
        let r_den = (values[k - 1] / m).powf(eta);
        omega.push((r_num + c) / (r_den + c));
    }
    Ok(SignalCurve {
        omega,
        ridge_used,
        eta,
        degenerate: false,
    })
}

/// The order estimate: the largest `k` with `omega[k] <= tau`, or
/// undetermined when no signal value clears the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub k_hat: Option<usize>,
    pub tau: f64,
    pub undetermined: bool,
    pub curve: SignalCurve,
}

pub fn estimate_order(curve: &SignalCurve, tau: f64) -> Result<OrderEstimate> {
    if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
        return Err(Error::validation(format!(
            "tau must lie strictly between 0 and 1, got {tau}"
        )));
    }
    let k_hat = (1..=curve.k_max())
        .filter(|&k| curve.omega()[k - 1] <= tau)
        .max();
    Ok(OrderEstimate {
        k_hat,
        tau,
        undetermined: k_hat.is_none(),
        curve: curve.clone(),
    })
}
